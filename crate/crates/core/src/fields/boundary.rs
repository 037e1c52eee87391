use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::grid::Grid2D;
use crate::error::{NpnsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Bottom,
    Top,
    Left,
    Right,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Bottom, Edge::Top, Edge::Left, Edge::Right];

    /// Number of boundary faces along this edge.
    pub fn n_faces(self, grid: &Grid2D) -> usize {
        match self {
            Edge::Bottom | Edge::Top => grid.nx,
            Edge::Left | Edge::Right => grid.ny,
        }
    }

    pub fn length(self, grid: &Grid2D) -> f64 {
        match self {
            Edge::Bottom | Edge::Top => grid.lx,
            Edge::Left | Edge::Right => grid.ly,
        }
    }

    pub fn face_width(self, grid: &Grid2D) -> f64 {
        match self {
            Edge::Bottom | Edge::Top => grid.hx(),
            Edge::Left | Edge::Right => grid.hy(),
        }
    }

    /// Physical coordinates of the k-th face midpoint on this edge.
    pub fn face_point(self, grid: &Grid2D, k: usize) -> (f64, f64) {
        match self {
            Edge::Bottom => (grid.x_center(k), 0.0),
            Edge::Top => (grid.x_center(k), grid.ly),
            Edge::Left => (0.0, grid.y_center(k)),
            Edge::Right => (grid.lx, grid.y_center(k)),
        }
    }

    /// Cell adjacent to the k-th face of this edge.
    pub fn adjacent_cell(self, grid: &Grid2D, k: usize) -> usize {
        match self {
            Edge::Bottom => grid.idx(k, 0),
            Edge::Top => grid.idx(k, grid.ny - 1),
            Edge::Left => grid.idx(0, k),
            Edge::Right => grid.idx(grid.nx - 1, k),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Edge::Bottom => "bottom",
            Edge::Top => "top",
            Edge::Left => "left",
            Edge::Right => "right",
        }
    }
}

/// Per-face data on the four edges of the rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeData<T> {
    pub bottom: Vec<T>,
    pub top: Vec<T>,
    pub left: Vec<T>,
    pub right: Vec<T>,
}

impl<T: Clone> EdgeData<T> {
    pub fn filled(grid: &Grid2D, value: T) -> Self {
        Self {
            bottom: vec![value.clone(); grid.nx],
            top: vec![value.clone(); grid.nx],
            left: vec![value.clone(); grid.ny],
            right: vec![value; grid.ny],
        }
    }

    pub fn edge(&self, edge: Edge) -> &[T] {
        match edge {
            Edge::Bottom => &self.bottom,
            Edge::Top => &self.top,
            Edge::Left => &self.left,
            Edge::Right => &self.right,
        }
    }

    pub fn edge_mut(&mut self, edge: Edge) -> &mut Vec<T> {
        match edge {
            Edge::Bottom => &mut self.bottom,
            Edge::Top => &mut self.top,
            Edge::Left => &mut self.left,
            Edge::Right => &mut self.right,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Edge, usize, &T)> {
        Edge::ALL
            .into_iter()
            .flat_map(move |e| self.edge(e).iter().enumerate().map(move |(k, v)| (e, k, v)))
    }
}

pub type EdgeMask = EdgeData<bool>;

/// A portion `[start, end]` (arc length) of one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub edge: Edge,
    pub start: f64,
    pub end: f64,
}

impl BoundarySegment {
    pub fn new(edge: Edge, start: f64, end: f64) -> Self {
        Self { edge, start, end }
    }

    pub fn whole(edge: Edge, grid: &Grid2D) -> Self {
        Self::new(edge, 0.0, edge.length(grid))
    }

    /// Face indices covered after snapping the endpoints to the nearest face boundaries.
    pub fn face_range(&self, grid: &Grid2D) -> Result<Range<usize>> {
        let len = self.edge.length(grid);
        if !(self.start.is_finite() && self.end.is_finite())
            || self.start < 0.0
            || self.end > len * (1.0 + 1e-12)
            || self.start >= self.end
        {
            return Err(NpnsError::InvalidParameter(format!(
                "segment [{}, {}] on {} edge must satisfy 0 <= start < end <= {}",
                self.start,
                self.end,
                self.edge.name(),
                len
            )));
        }
        let w = self.edge.face_width(grid);
        let n = self.edge.n_faces(grid);
        let a = ((self.start / w).round() as usize).min(n);
        let b = ((self.end / w).round() as usize).min(n);
        if b <= a {
            return Err(NpnsError::InvalidParameter(format!(
                "segment [{}, {}] on {} edge is shorter than one face (width {w})",
                self.start,
                self.end,
                self.edge.name()
            )));
        }
        Ok(a..b)
    }
}

/// Builds the face mask covered by a list of segments.
pub fn segment_mask(grid: &Grid2D, segments: &[BoundarySegment]) -> Result<EdgeMask> {
    let mut mask = EdgeMask::filled(grid, false);
    for seg in segments {
        for k in seg.face_range(grid)? {
            mask.edge_mut(seg.edge)[k] = true;
        }
    }
    Ok(mask)
}

/// Boundary potential `W` sampled at the boundary face midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub grid: Grid2D,
    pub w: EdgeData<f64>,
}

impl BoundarySpec {
    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            w: EdgeData::filled(&grid, value),
        }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut w = EdgeData::filled(&grid, 0.0);
        for edge in Edge::ALL {
            for k in 0..edge.n_faces(&grid) {
                let (x, y) = edge.face_point(&grid, k);
                w.edge_mut(edge)[k] = f(x, y);
            }
        }
        Self { grid, w }
    }

    pub fn from_samples(grid: Grid2D, w: EdgeData<f64>) -> Result<Self> {
        for edge in Edge::ALL {
            if w.edge(edge).len() != edge.n_faces(&grid) {
                return Err(NpnsError::Shape(format!(
                    "{} edge needs {} samples, got {}",
                    edge.name(),
                    edge.n_faces(&grid),
                    w.edge(edge).len()
                )));
            }
        }
        if w.iter().any(|(_, _, v)| !v.is_finite()) {
            return Err(NpnsError::InvalidParameter(
                "boundary potential samples must be finite".into(),
            ));
        }
        Ok(Self { grid, w })
    }

    pub fn max_abs(&self) -> f64 {
        self.w.iter().fold(0.0_f64, |m, (_, _, v)| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.w.iter().fold(f64::INFINITY, |m, (_, _, v)| m.min(*v))
    }

    pub fn max(&self) -> f64 {
        self.w.iter().fold(f64::NEG_INFINITY, |m, (_, _, v)| m.max(*v))
    }

    /// Returns the common value of `W` over the masked faces, if it is constant there.
    pub fn constant_on(&self, mask: &EdgeMask) -> Option<f64> {
        let mut value: Option<f64> = None;
        for (edge, k, &on) in mask.iter() {
            if !on {
                continue;
            }
            let w = self.w.edge(edge)[k];
            match value {
                None => value = Some(w),
                Some(v) if (v - w).abs() <= 1e-12 * (1.0 + v.abs()) => {}
                Some(_) => return None,
            }
        }
        value
    }
}
