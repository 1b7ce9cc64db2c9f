//! Finite design spaces.

use crate::error::Error;
use std::collections::HashSet;

/// One candidate design point: a stable text label plus real coordinates
/// (a single coordinate for dose levels).
#[derive(Clone, Debug, PartialEq)]
pub struct DesignPoint {
    pub label: String,
    pub coords: Vec<f64>,
}

impl DesignPoint {
    /// One-dimensional point labeled by its coordinate value.
    pub fn scalar(x: f64) -> Self {
        DesignPoint {
            label: format!("{x}"),
            coords: vec![x],
        }
    }
}

/// Ordered finite set of candidate points. Points are addressed by their
/// position; reports and files use 1-based indices.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignSpace {
    points: Vec<DesignPoint>,
}

impl DesignSpace {
    pub fn new(points: Vec<DesignPoint>) -> Result<Self, Error> {
        if points.is_empty() {
            return Err(Error::EmptySpace);
        }
        let mut seen = HashSet::new();
        for p in &points {
            if !seen.insert(p.label.as_str()) {
                return Err(Error::DuplicateLabel(p.label.clone()));
            }
        }
        Ok(DesignSpace { points })
    }

    /// Equidistant one-dimensional grid, e.g. doses `0, 1, ..., 100`.
    pub fn grid(from: f64, to: f64, count: usize) -> Result<Self, Error> {
        if count == 0 {
            return Err(Error::EmptySpace);
        }
        let step = if count > 1 {
            (to - from) / (count - 1) as f64
        } else {
            0.0
        };
        Self::new(
            (0..count)
                .map(|i| DesignPoint::scalar(from + step * i as f64))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DesignPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &DesignPoint {
        &self.points[i]
    }

    /// First coordinate of point `i`; the dose axis for scalar spaces.
    pub fn coord(&self, i: usize) -> f64 {
        self.points[i].coords[0]
    }

    /// Position of the point with the given label, if any.
    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p.label == label)
    }

    /// Position of the scalar point whose coordinate equals `x` exactly.
    pub fn index_of_coord(&self, x: f64) -> Option<usize> {
        self.points
            .iter()
            .position(|p| p.coords.len() == 1 && p.coords[0] == x)
    }
}
