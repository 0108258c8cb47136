//! Confusion groups from validation predictions.
//!
//! `T[i][j]` is the share of class-`i` files predicted as `j`. `S[i][j]` is
//! the mean top-five normalized probability of `j` over the files predicted
//! as `i`. Classes `i != j` are related when either entry exceeds its
//! threshold in either direction; groups are the connected components of
//! that relation with at least two members.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::LabelMap;
use crate::network::Prediction;
use crate::{ClassId, Scalar};

pub const DEFAULT_TAU_T: f64 = 0.05;
pub const DEFAULT_TAU_S: f64 = 0.02;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfusionError {
    #[error("record {0}: predicted class is not the top entry of its top five")]
    Malformed(usize),
    #[error("class id {id} out of range for {classes} classes")]
    OutOfRange { id: ClassId, classes: usize },
    #[error("T and S have different sizes")]
    Shape,
}

/// Square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    fn to_tsv(&self, title: &str, labels: &LabelMap) -> String {
        let name = |i: usize| labels.name(i).map_or_else(|| i.to_string(), str::to_string);
        let mut out = String::from(title);
        for j in 0..self.n {
            let _ = write!(out, "\t{}", name(j));
        }
        out.push('\n');
        for i in 0..self.n {
            out.push_str(&name(i));
            for v in self.row(i) {
                let _ = write!(out, "\t{:?}", v.to_f64_lossy());
            }
            out.push('\n');
        }
        out
    }
}

/// `T[i][j]` from `(truth, predicted)` pairs. Rows of absent classes are zero.
pub fn compute_t<T: Scalar>(
    pairs: &[(ClassId, ClassId)],
    classes: usize,
) -> Result<Matrix<T>, ConfusionError> {
    let mut counts = vec![0u64; classes * classes];
    let mut rows = vec![0u64; classes];
    for &(truth, predicted) in pairs {
        for id in [truth, predicted] {
            if id >= classes {
                return Err(ConfusionError::OutOfRange { id, classes });
            }
        }
        counts[truth * classes + predicted] += 1;
        rows[truth] += 1;
    }
    let mut t = Matrix::zeros(classes);
    for i in 0..classes {
        if rows[i] == 0 {
            continue;
        }
        for j in 0..classes {
            t.set(
                i,
                j,
                T::of_count(counts[i * classes + j]) / T::of_count(rows[i]),
            );
        }
    }
    Ok(t)
}

/// A prediction reduced to what `S` needs: the predicted class and the top
/// five classes with their raw probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TopRecord<T> {
    pub predicted: ClassId,
    pub top: Vec<(ClassId, T)>,
}

impl<T: Scalar> TopRecord<T> {
    pub fn from_prediction(p: &Prediction<T>) -> Self {
        TopRecord {
            predicted: p.predicted,
            top: p.top_raw(crate::network::TOP_K),
        }
    }
}

/// `S[i][j]` from top-five records.
pub fn compute_s<T: Scalar>(
    records: &[TopRecord<T>],
    classes: usize,
) -> Result<Matrix<T>, ConfusionError> {
    let mut sums = Matrix::<T>::zeros(classes);
    let mut predicted = vec![0u64; classes];
    for (r, rec) in records.iter().enumerate() {
        let top_p = rec
            .top
            .iter()
            .find(|&&(c, _)| c == rec.predicted)
            .map(|&(_, p)| p);
        match top_p {
            Some(p) if rec.top.iter().all(|&(_, q)| q <= p) => {}
            _ => return Err(ConfusionError::Malformed(r)),
        }
        for &(c, _) in &rec.top {
            if c >= classes {
                return Err(ConfusionError::OutOfRange { id: c, classes });
            }
        }
        let total = crate::network::ascending_sum(rec.top.iter().map(|&(_, p)| p));
        if total > T::zero() {
            for &(j, p) in &rec.top {
                let i = rec.predicted;
                sums.set(i, j, sums.get(i, j) + p / total);
            }
        }
        predicted[rec.predicted] += 1;
    }
    for (i, &count) in predicted.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let n = T::of_count(count);
        for j in 0..classes {
            sums.set(i, j, sums.get(i, j) / n);
        }
    }
    Ok(sums)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionStats<T> {
    pub t: Matrix<T>,
    pub s: Matrix<T>,
    pub tau_t: T,
    pub tau_s: T,
}

impl<T: Scalar> ConfusionStats<T> {
    pub fn new(t: Matrix<T>, s: Matrix<T>) -> Self {
        ConfusionStats {
            t,
            s,
            tau_t: T::of(DEFAULT_TAU_T),
            tau_s: T::of(DEFAULT_TAU_S),
        }
    }

    /// Both matrices from validation `(truth, prediction)` pairs.
    pub fn from_predictions(
        results: &[(ClassId, Prediction<T>)],
        classes: usize,
    ) -> Result<Self, ConfusionError> {
        let pairs: Vec<_> = results
            .iter()
            .map(|(truth, p)| (*truth, p.predicted))
            .collect();
        let records: Vec<_> = results
            .iter()
            .map(|(_, p)| TopRecord::from_prediction(p))
            .collect();
        Ok(Self::new(
            compute_t(&pairs, classes)?,
            compute_s(&records, classes)?,
        ))
    }

    pub fn with_thresholds(mut self, tau_t: T, tau_s: T) -> Self {
        self.tau_t = tau_t;
        self.tau_s = tau_s;
        self
    }

    fn related(&self, i: usize, j: usize) -> bool {
        self.t.get(i, j) > self.tau_t
            || self.t.get(j, i) > self.tau_t
            || self.s.get(i, j) > self.tau_s
            || self.s.get(j, i) > self.tau_s
    }

    pub fn to_tsv(&self, labels: &LabelMap) -> String {
        let mut out = self.t.to_tsv("T", labels);
        out.push('\n');
        out.push_str(&self.s.to_tsv("S", labels));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionGroups {
    /// Sorted members; groups ordered by their smallest member.
    pub groups: Vec<Vec<ClassId>>,
    pub ungrouped: Vec<ClassId>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn build_groups<T: Scalar>(
    stats: &ConfusionStats<T>,
) -> Result<ConfusionGroups, ConfusionError> {
    let n = stats.t.size();
    if stats.s.size() != n {
        return Err(ConfusionError::Shape);
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if stats.related(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut components: BTreeMap<usize, Vec<ClassId>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        components.entry(root).or_default().push(i);
    }
    let mut out = ConfusionGroups::default();
    for members in components.into_values() {
        if members.len() >= 2 {
            out.groups.push(members);
        } else {
            out.ungrouped.extend(members);
        }
    }
    out.groups.sort();
    out.ungrouped.sort();
    Ok(out)
}

impl ConfusionGroups {
    /// Two-column table: group id, comma-separated extensions.
    pub fn to_table(&self, labels: &LabelMap) -> String {
        let mut out = String::from("group\textensions\n");
        for (g, members) in self.groups.iter().enumerate() {
            let names: Vec<String> = members
                .iter()
                .map(|&c| {
                    labels
                        .name(c)
                        .map_or_else(|| c.to_string(), |n| format!(".{n}"))
                })
                .collect();
            let _ = writeln!(out, "{g}\t{}", names.join(", "));
        }
        out
    }

    pub fn group_of(&self, class: ClassId) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&class))
    }
}
