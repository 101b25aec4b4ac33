use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellDiff {
    pub row: usize,
    pub col: usize,
    pub expected: u8,
    pub actual: u8,
}

/// Cell-level comparison of an expected and an actual grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub dims_match: bool,
    pub expected_dims: (usize, usize),
    pub actual_dims: (usize, usize),
    /// Differing cells inside the overlap of both grids, row-major.
    pub cells: Vec<CellDiff>,
    /// Number of cells compared (the overlap area).
    pub compared: usize,
}

impl DiffSummary {
    pub fn is_match(&self) -> bool {
        self.dims_match && self.cells.is_empty()
    }

    /// The DIFFERENCE SUMMARY block used in debugger output.
    pub fn render_summary(&self, max_cells: usize) -> String {
        let mut s = String::new();
        if !self.dims_match {
            let _ = writeln!(
                s,
                "Dimension mismatch: expected {}x{}, actual {}x{}",
                self.expected_dims.0, self.expected_dims.1, self.actual_dims.0, self.actual_dims.1
            );
        }
        let _ = writeln!(s, "{} of {} overlapping cells differ", self.cells.len(), self.compared);
        for d in self.cells.iter().take(max_cells) {
            let _ = writeln!(s, "  (row {}, col {}): expected {}, actual {}", d.row, d.col, d.expected, d.actual);
        }
        if self.cells.len() > max_cells {
            let _ = writeln!(s, "  … {} more", self.cells.len() - max_cells);
        }
        s
    }
}

pub fn grid_diff(expected: &Grid, actual: &Grid) -> DiffSummary {
    let rows = expected.rows().min(actual.rows());
    let cols = expected.cols().min(actual.cols());
    let mut cells = Vec::new();
    for r in 1..=rows {
        for c in 1..=cols {
            let (e, a) = (expected.get(r, c).unwrap(), actual.get(r, c).unwrap());
            if e != a {
                cells.push(CellDiff { row: r, col: c, expected: e, actual: a });
            }
        }
    }
    DiffSummary {
        dims_match: expected.dimensions() == actual.dimensions(),
        expected_dims: expected.dimensions(),
        actual_dims: actual.dimensions(),
        cells,
        compared: rows * cols,
    }
}

/// Lays out labeled grids side by side as digit rows, separated by a gap.
/// Missing grids render as a single `(none)` cell.
pub fn side_by_side(panels: &[(&str, Option<&Grid>)]) -> String {
    let columns: Vec<(String, Vec<String>)> = panels
        .iter()
        .map(|(label, g)| {
            let rows = match g {
                Some(g) => g.to_digit_rows(),
                None => vec!["(none)".to_string()],
            };
            (label.to_string(), rows)
        })
        .collect();
    let widths: Vec<usize> = columns
        .iter()
        .map(|(l, rows)| rows.iter().map(|r| r.chars().count()).chain([l.chars().count()]).max().unwrap_or(0))
        .collect();
    let height = columns.iter().map(|(_, rows)| rows.len()).max().unwrap_or(0);
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let mut l = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                l.push_str("   ");
            }
            let pad = widths[i].saturating_sub(cell.chars().count());
            l.push_str(cell);
            l.extend(std::iter::repeat_n(' ', pad));
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(columns.iter().map(|(l, _)| l.as_str()).collect(), &mut out);
    for i in 0..height {
        line(columns.iter().map(|(_, rows)| rows.get(i).map(String::as_str).unwrap_or("")).collect(), &mut out);
    }
    out
}
