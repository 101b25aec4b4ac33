use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest legal color value.
pub const MAX_COLOR: u8 = 9;

/// A 1-indexed `(row, col)` coordinate.
pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("grid has no rows")]
    Empty,
    #[error("row {row} has length {len}, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },
    #[error("cell ({row},{col}) holds {value}, outside 0..=9")]
    BadValue { row: usize, col: usize, value: i64 },
}

/// Rectangular matrix of colors in `0..=9`, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
}

impl Grid {
    pub fn filled(rows: usize, cols: usize, value: u8) -> Result<Self, GridError> {
        if rows == 0 || cols == 0 {
            return Err(GridError::Empty);
        }
        if value > MAX_COLOR {
            return Err(GridError::BadValue { row: 1, col: 1, value: value as i64 });
        }
        Ok(Grid { rows, cols, cells: vec![value; rows * cols] })
    }

    /// Builds a grid from nested rows, validating shape and color range.
    pub fn from_rows<R, V>(rows: &[R]) -> Result<Self, GridError>
    where
        R: AsRef<[V]>,
        V: Copy + Into<i64>,
    {
        let first = rows.first().ok_or(GridError::Empty)?.as_ref().len();
        if first == 0 {
            return Err(GridError::Empty);
        }
        let mut cells = Vec::with_capacity(rows.len() * first);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != first {
                return Err(GridError::Ragged { row: r + 1, len: row.len(), expected: first });
            }
            for (c, v) in row.iter().enumerate() {
                let v: i64 = (*v).into();
                if !(0..=MAX_COLOR as i64).contains(&v) {
                    return Err(GridError::BadValue { row: r + 1, col: c + 1, value: v });
                }
                cells.push(v as u8);
            }
        }
        Ok(Grid { rows: rows.len(), cols: first, cells })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 1 && col >= 1 && row as usize <= self.rows && col as usize <= self.cols
    }

    /// Value at a 1-indexed position, `None` when out of bounds.
    pub fn get(&self, row: usize, col: usize) -> Option<u8> {
        if row == 0 || col == 0 || row > self.rows || col > self.cols {
            return None;
        }
        Some(self.cells[(row - 1) * self.cols + (col - 1)])
    }

    /// Out-of-bounds reads yield 0, the convention hole counting relies on.
    pub fn value_or_zero(&self, row: i64, col: i64) -> u8 {
        if self.in_bounds(row, col) {
            self.cells[(row as usize - 1) * self.cols + (col as usize - 1)]
        } else {
            0
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        assert!(value <= MAX_COLOR, "color {value} out of range");
        let (r, c) = (row, col);
        assert!(r >= 1 && c >= 1 && r <= self.rows && c <= self.cols, "({r},{c}) out of bounds");
        self.cells[(r - 1) * self.cols + (c - 1)] = value;
    }

    /// 4-neighbours in the order down, up, right, left, clipped to the grid.
    pub fn neighbors4(&self, row: i64, col: i64) -> Vec<(i64, i64)> {
        let (rows, cols) = (self.rows as i64, self.cols as i64);
        let mut out = Vec::with_capacity(4);
        if row + 1 <= rows {
            out.push((row + 1, col));
        }
        if row - 1 >= 1 {
            out.push((row - 1, col));
        }
        if col + 1 <= cols {
            out.push((row, col + 1));
        }
        if col - 1 >= 1 {
            out.push((row, col - 1));
        }
        out
    }

    pub fn row(&self, row: usize) -> &[u8] {
        let start = (row - 1) * self.cols;
        &self.cells[start..start + self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.cells.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    /// Row-major iterator over `((row, col), value)`.
    pub fn iter(&self) -> impl Iterator<Item = (Cell, u8)> + '_ {
        let cols = self.cols;
        self.cells.iter().enumerate().map(move |(i, &v)| ((i / cols + 1, i % cols + 1), v))
    }

    /// Space-separated digits, one row per line, no trailing newline.
    pub fn to_digit_rows(&self) -> Vec<String> {
        self.cells
            .chunks(self.cols)
            .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
            .collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_digit_rows().join("\n"))
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid{:?}", self.to_rows())
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<i64>> = Vec::deserialize(d)?;
        Grid::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
