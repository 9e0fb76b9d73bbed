//! Trap depth by priority flood over a grid of the effective potential.
//!
//! Flooding from the minimum cell in order of increasing level visits every
//! cell at the lowest threshold for which it joins the basin. The first
//! boundary or wire-adjacent cell reached therefore fixes the escape
//! threshold exactly at grid resolution, the same answer a bisection on the
//! threshold converges to.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Vec3;

use super::minimize::Potential;

/// Smallest accepted resolution along any sampled axis.
pub const MIN_RESOLUTION: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthGrid {
    pub lo: Vec3,
    pub hi: Vec3,
    /// Points per axis. An axis with one point is a slice, used for guides.
    pub resolution: [usize; 3],
    /// Cells closer than this to a conductor are treated as lost, m.
    pub exclusion: f64,
}

/// Box size and resolution as multiples of the trap height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridPolicy {
    /// x, y ∈ [−h z₀, h z₀].
    pub half_width: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub points: usize,
    /// Exclusion radius as a fraction of z₀ (at least the wire width).
    pub exclusion: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            half_width: 6.0,
            z_min: 0.05,
            z_max: 8.0,
            points: 161,
            exclusion: 0.02,
        }
    }
}

impl GridPolicy {
    pub fn with_points(mut self, n: usize) -> Self {
        self.points = n;
        self
    }
}

impl DepthGrid {
    pub fn new(lo: Vec3, hi: Vec3, resolution: [usize; 3], exclusion: f64) -> Result<Self> {
        let g = DepthGrid {
            lo,
            hi,
            resolution,
            exclusion,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid for a trap of height `z0` built from conductors of width `width`.
    pub fn for_trap(z0: f64, width: f64, policy: &GridPolicy) -> Result<Self> {
        let h = policy.half_width * z0;
        let n = policy.points;
        DepthGrid::new(
            Vec3::new(-h, -h, policy.z_min * z0),
            Vec3::new(h, h, policy.z_max * z0),
            [n, n, n],
            width.max(policy.exclusion * z0),
        )
    }

    /// The y–z plane through `x`, for guides with a free x axis.
    pub fn guide_slice(z0: f64, width: f64, x: f64, policy: &GridPolicy) -> Result<Self> {
        let mut g = DepthGrid::for_trap(z0, width, policy)?;
        g.lo.x = x;
        g.hi.x = x;
        g.resolution[0] = 1;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let mut sampled = 0;
        for i in 0..3 {
            let n = self.resolution[i];
            if n == 1 {
                if self.lo[i] != self.hi[i] {
                    return Err(Error::invalid("a one-point axis needs equal bounds"));
                }
                continue;
            }
            sampled += 1;
            if n < MIN_RESOLUTION {
                return Err(Error::invalid(format!(
                    "depth grid needs at least {MIN_RESOLUTION} points per axis"
                )));
            }
            if !(self.hi[i] > self.lo[i]) {
                return Err(Error::invalid("depth grid bounds are empty"));
            }
        }
        if sampled < 2 {
            return Err(Error::invalid("depth grid must sample at least two axes"));
        }
        if !(self.exclusion >= 0.0) {
            return Err(Error::invalid("exclusion radius must be non-negative"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        let n = self.resolution[axis];
        if n == 1 {
            self.lo[axis]
        } else {
            self.lo[axis] + (self.hi[axis] - self.lo[axis]) * i as f64 / (n - 1) as f64
        }
    }

    fn unflatten(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.resolution;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    fn flatten(&self, c: [usize; 3]) -> usize {
        let [nx, ny, _] = self.resolution;
        c[0] + nx * (c[1] + ny * c[2])
    }

    pub fn point(&self, idx: usize) -> Vec3 {
        let c = self.unflatten(idx);
        Vec3::new(self.coord(0, c[0]), self.coord(1, c[1]), self.coord(2, c[2]))
    }

    fn contains(&self, r: &Vec3) -> bool {
        (0..3).all(|i| {
            if self.resolution[i] == 1 {
                true
            } else {
                r[i] > self.lo[i] && r[i] < self.hi[i]
            }
        })
    }

    fn nearest(&self, r: &Vec3) -> usize {
        let mut c = [0usize; 3];
        for (i, ci) in c.iter_mut().enumerate() {
            let n = self.resolution[i];
            if n > 1 {
                let f = (r[i] - self.lo[i]) / (self.hi[i] - self.lo[i]) * (n - 1) as f64;
                *ci = (f.round().max(0.0) as usize).min(n - 1);
            }
        }
        self.flatten(c)
    }

    fn on_boundary(&self, c: [usize; 3]) -> bool {
        (0..3).any(|i| self.resolution[i] > 1 && (c[i] == 0 || c[i] == self.resolution[i] - 1))
    }

    fn neighbours(&self, c: [usize; 3], out: &mut Vec<usize>) {
        out.clear();
        for i in 0..3 {
            if self.resolution[i] == 1 {
                continue;
            }
            if c[i] > 0 {
                let mut d = c;
                d[i] -= 1;
                out.push(self.flatten(d));
            }
            if c[i] + 1 < self.resolution[i] {
                let mut d = c;
                d[i] += 1;
                out.push(self.flatten(d));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthResult {
    /// Depth in field units, T (energy divided by the moment).
    pub depth: f64,
    /// Depth as an energy, J.
    pub energy: f64,
    /// Grid cell that sets the escape threshold.
    pub saddle: Vec3,
    /// Potential at the minimum, J.
    pub minimum_value: f64,
    /// True when escape happened into the wire-exclusion region rather than
    /// through the grid boundary.
    pub escape_to_wire: bool,
}

/// Sampled potential on a grid; excluded cells hold +∞ and a flag.
pub struct SampledGrid {
    pub grid: DepthGrid,
    pub values: Vec<f64>,
    pub excluded: Vec<bool>,
}

pub fn sample_grid<P: Potential + ?Sized>(p: &P, grid: &DepthGrid) -> Result<SampledGrid> {
    grid.validate()?;
    let samples: Vec<Result<(f64, bool)>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let r = grid.point(idx);
            if p.wire_distance(&r) < grid.exclusion {
                return Ok((f64::INFINITY, true));
            }
            match p.value_coarse(&r) {
                Ok(v) => Ok((v, false)),
                Err(Error::EvaluationOnWire { .. }) => Ok((f64::INFINITY, true)),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut values = Vec::with_capacity(samples.len());
    let mut excluded = Vec::with_capacity(samples.len());
    for s in samples {
        let (v, x) = s?;
        values.push(v);
        excluded.push(x);
    }
    Ok(SampledGrid {
        grid: *grid,
        values,
        excluded,
    })
}

/// Depth of the basin of a known minimum.
pub fn trap_depth<P: Potential + ?Sized>(p: &P, grid: &DepthGrid, minimum: &Vec3) -> Result<DepthResult> {
    if !grid.contains(minimum) {
        return Err(Error::MinimumOutsideGrid);
    }
    let sampled = sample_grid(p, grid)?;
    let v_min = p.value(minimum)?;
    flood(&sampled, minimum, v_min, p.moment())
}

struct Level(f64);

impl PartialEq for Level {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Level {}

impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Level {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Priority flood from the cell nearest `minimum`.
pub fn flood(s: &SampledGrid, minimum: &Vec3, v_min: f64, moment: f64) -> Result<DepthResult> {
    let g = &s.grid;
    if !g.contains(minimum) {
        return Err(Error::MinimumOutsideGrid);
    }
    let start = g.nearest(minimum);
    if s.excluded[start] {
        return Err(Error::MinimumOutsideGrid);
    }
    let mut visited = vec![false; g.len()];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Level(s.values[start]), start)));
    visited[start] = true;
    let mut level = f64::NEG_INFINITY;
    let mut saddle = start;
    let mut nb = Vec::with_capacity(6);
    while let Some(Reverse((Level(l), idx))) = heap.pop() {
        if l > level {
            level = l;
            saddle = idx;
        }
        let c = g.unflatten(idx);
        g.neighbours(c, &mut nb);
        let touches_wire = nb.iter().any(|&n| s.excluded[n]);
        if g.on_boundary(c) || touches_wire {
            let energy = level - v_min;
            if !(energy > 1e-12 * v_min.abs().max(f64::MIN_POSITIVE)) {
                return Err(Error::UntrappedConfiguration { threshold: energy });
            }
            return Ok(DepthResult {
                depth: energy / moment,
                energy,
                saddle: g.point(saddle),
                minimum_value: v_min,
                escape_to_wire: touches_wire && !g.on_boundary(c),
            });
        }
        for &n in &nb {
            if !visited[n] {
                visited[n] = true;
                heap.push(Reverse((Level(s.values[n].max(l)), n)));
            }
        }
    }
    Err(Error::UntrappedConfiguration {
        threshold: f64::INFINITY,
    })
}
