//! Uniform bucket grid over positions.
//!
//! Buckets are keyed by position only; exact filtering happens with the full
//! scenario metric, which dominates position distance, so queries are exact
//! for both planar and pose states.

use crate::geometry::{Bounds, Metric, State};

#[derive(Clone, Debug)]
pub struct GridIndex {
    bounds: Bounds,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl GridIndex {
    /// `bounds` should cover where points are expected; points outside land
    /// in the border buckets and are still found.
    pub fn new(bounds: Bounds, cell: f64) -> Self {
        assert!(cell > 0.0);
        let nx = ((bounds.width() / cell).ceil() as usize).max(1);
        let ny = ((bounds.height() / cell).ceil() as usize).max(1);
        GridIndex {
            bounds,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        }
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let i = ((x - self.bounds.lo[0]) / self.cell).floor();
        let j = ((y - self.bounds.lo[1]) / self.cell).floor();
        (
            i.clamp(0.0, (self.nx - 1) as f64) as usize,
            j.clamp(0.0, (self.ny - 1) as f64) as usize,
        )
    }

    pub fn insert(&mut self, id: u32, p: &State) {
        let (i, j) = self.cell_of(p.x(), p.y());
        self.buckets[j * self.nx + i].push(id);
    }

    /// Calls `f` with every id whose bucket overlaps the square of half-width
    /// `r` around `p`. Candidates are a superset; callers filter.
    pub fn for_each_candidate(&self, p: &State, r: f64, mut f: impl FnMut(u32)) {
        let (i0, j0) = self.cell_of(p.x() - r, p.y() - r);
        let (i1, j1) = self.cell_of(p.x() + r, p.y() + r);
        for j in j0..=j1 {
            for bucket in &self.buckets[j * self.nx + i0..=j * self.nx + i1] {
                bucket.iter().for_each(|&id| f(id));
            }
        }
    }

    /// Ids of `points` within metric distance `r` of `p`, ascending.
    pub fn within(&self, points: &[State], metric: &Metric, p: &State, r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_candidate(p, r, |id| {
            if metric.dist(&points[id as usize], p) <= r {
                out.push(id);
            }
        });
        out.sort_unstable();
        out
    }
}
