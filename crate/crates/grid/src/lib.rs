//! ARC grid world: the `Grid` data model, cell matchers, and the
//! connected-component / hole-counting primitives that back the `bk`
//! background-knowledge library.
//!
//! All coordinates are 1-indexed `(row, col)` pairs; `(1, 1)` is the
//! top-left cell.

mod components;
mod diff;
mod grid;
mod matcher;

pub use components::{
    apply_component_labels, collect_points, component_bbox, component_hole_count,
    components_with_holes, connected_components, hole_count_with, label_components,
    map_grid_cells, BBox, Component,
};
pub use diff::{grid_diff, side_by_side, CellDiff, DiffSummary};
pub use grid::{Cell, Grid, GridError, MAX_COLOR};
pub use matcher::Matcher;
