//! Encoded design matrix with the original-column grouping preserved.

use serde::{Deserialize, Serialize};

/// Encoded kind of an original column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GroupKind {
    Numeric,
    Binary,
    Nominal { categories: Vec<String> },
}

/// Maps one original column to its contiguous range of encoded columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub start: usize,
    pub width: usize,
    pub kind: GroupKind,
}

impl FeatureGroup {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width
    }
}

/// Row-major n × p design matrix. Nominal columns appear as one-hot blocks;
/// `groups` records which encoded columns belong to which original column
/// so explainers can treat one-hot blocks atomically.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    groups: Vec<FeatureGroup>,
}

impl FeatureMatrix {
    pub(crate) fn new(
        names: Vec<String>,
        data: Vec<f64>,
        n_rows: usize,
        n_cols: usize,
        groups: Vec<FeatureGroup>,
    ) -> Self {
        debug_assert_eq!(names.len(), n_cols);
        debug_assert_eq!(data.len(), n_rows * n_cols);
        FeatureMatrix { names, data, n_rows, n_cols, groups }
    }

    /// Builds a matrix from plain numeric columns, one group per column.
    /// Intended for tests and programmatic callers that bypass `Dataset`.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Self {
        assert_eq!(names.len(), columns.len(), "one name per column");
        let n_cols = columns.len();
        let n_rows = columns.first().map_or(0, Vec::len);
        for c in &columns {
            assert_eq!(c.len(), n_rows, "ragged columns");
        }
        let mut data = vec![0.0; n_rows * n_cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * n_cols + j] = v;
            }
        }
        let groups = names
            .iter()
            .enumerate()
            .map(|(j, name)| FeatureGroup {
                name: name.clone(),
                start: j,
                width: 1,
                kind: GroupKind::Numeric,
            })
            .collect();
        FeatureMatrix { names, data, n_rows, n_cols, groups }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&FeatureGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Index of an encoded column by name.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n_cols + col] = value;
    }

    #[inline]
    pub fn row_slice(&self, row: usize) -> &[f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn column_values(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, col)).collect()
    }

    /// Copies the selected rows into a new matrix with the same columns.
    pub fn take_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row_slice(r));
        }
        FeatureMatrix {
            names: self.names.clone(),
            data,
            n_rows: rows.len(),
            n_cols: self.n_cols,
            groups: self.groups.clone(),
        }
    }

    /// Overwrites every row of `col` with the constant `value`.
    pub fn fill_column(&mut self, col: usize, value: f64) {
        for i in 0..self.n_rows {
            self.set(i, col, value);
        }
    }

    /// Sets a one-hot block to the given category for every row.
    pub fn fill_onehot(&mut self, group: &FeatureGroup, category_idx: usize) {
        assert!(category_idx < group.width);
        for i in 0..self.n_rows {
            for (slot, c) in group.columns().enumerate() {
                self.set(i, c, if slot == category_idx { 1.0 } else { 0.0 });
            }
        }
    }

    /// Copies the group's cells of `source_row` into row `row`.
    pub fn copy_group_cells(&mut self, row: usize, group: &FeatureGroup, source_row: &[f64]) {
        for c in group.columns() {
            self.set(row, c, source_row[c]);
        }
    }

    /// Reorders the group's cells across rows by `perm`: row `i` receives
    /// the group cells previously held by row `perm[i]`.
    pub fn permute_group_rows(&mut self, group: &FeatureGroup, perm: &[usize]) {
        assert_eq!(perm.len(), self.n_rows);
        let cols: Vec<usize> = group.columns().collect();
        let snapshot: Vec<f64> =
            perm.iter().flat_map(|&src| cols.iter().map(move |&c| (src, c))).map(|(src, c)| self.get(src, c)).collect();
        let mut it = snapshot.into_iter();
        for i in 0..self.n_rows {
            for &c in &cols {
                let v = it.next().unwrap();
                self.set(i, c, v);
            }
        }
    }

    /// Category label of a nominal group at `row`, read off the one-hot
    /// block (the inverse of encoding).
    pub fn nominal_label<'g>(&self, row: usize, group: &'g FeatureGroup) -> Option<&'g str> {
        let GroupKind::Nominal { categories } = &group.kind else {
            return None;
        };
        for (slot, c) in group.columns().enumerate() {
            if self.get(row, c) == 1.0 {
                return Some(&categories[slot]);
            }
        }
        None
    }

    /// Smallest and largest value observed in a column.
    pub fn column_range(&self, col: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n_rows {
            let v = self.get(i, col);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}
