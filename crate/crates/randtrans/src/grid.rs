//! Point grids on fibers, with densities and measures attached.
//!
//! A fiber grid is a fixed, ordered list of points extracted from a Julia
//! cloud. Densities carry one real value per grid point, measures one
//! nonnegative weight. All pairings are checked through the `(fiber, len)`
//! identity so stale data cannot silently cross fibers.

use num_complex::Complex64;

use crate::{Error, Result};

/// Uniform-cell spatial hash for nearest-neighbor queries on a point set.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell: f64,
    map: std::collections::HashMap<(i64, i64), Vec<u32>>,
    bbox: (f64, f64, f64, f64), // re_lo, re_hi, im_lo, im_hi
}

impl SpatialIndex {
    pub fn build(points: &[Complex64], cell: f64) -> Self {
        let cell = if cell > 0.0 { cell } else { 1.0 };
        let mut map: std::collections::HashMap<(i64, i64), Vec<u32>> =
            std::collections::HashMap::new();
        let mut bbox = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (i, z) in points.iter().enumerate() {
            map.entry(Self::key(*z, cell)).or_default().push(i as u32);
            bbox.0 = bbox.0.min(z.re);
            bbox.1 = bbox.1.max(z.re);
            bbox.2 = bbox.2.min(z.im);
            bbox.3 = bbox.3.max(z.im);
        }
        SpatialIndex { cell, map, bbox }
    }

    fn key(z: Complex64, cell: f64) -> (i64, i64) {
        ((z.re / cell).floor() as i64, (z.im / cell).floor() as i64)
    }

    /// Index and distance of the nearest point; ties break toward the lowest
    /// index so queries are deterministic.
    ///
    /// Queries far outside the support are clamped to the bounding box
    /// before the search, so they resolve in O(1) rings to a boundary
    /// representative (the reported distance is still measured from the
    /// original query). Such lookups are extrapolations and the callers flag
    /// them through their support tolerance.
    pub fn nearest(&self, points: &[Complex64], z: Complex64) -> Option<(usize, f64)> {
        if points.is_empty() {
            return None;
        }
        let anchor = Complex64::new(
            z.re.clamp(self.bbox.0, self.bbox.1),
            z.im.clamp(self.bbox.2, self.bbox.3),
        );
        let (kx, ky) = Self::key(anchor, self.cell);
        let mut best: Option<(usize, f64)> = None;
        let mut ring = 0i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue; // only the ring boundary
                    }
                    if let Some(bucket) = self.map.get(&(kx + dx, ky + dy)) {
                        for &i in bucket {
                            let d = (points[i as usize] - anchor).norm();
                            let better = match best {
                                None => true,
                                Some((bi, bd)) => {
                                    d < bd - 1e-15 || (d <= bd + 1e-15 && (i as usize) < bi)
                                }
                            };
                            if better {
                                best = Some((i as usize, d));
                            }
                        }
                    }
                }
            }
            // once a candidate exists, one extra ring guarantees correctness
            if let Some((_, bd)) = best {
                if bd <= (ring as f64) * self.cell {
                    let (i, _) = best.unwrap();
                    return Some((i, (points[i] - z).norm()));
                }
            }
            ring += 1;
            if ring as f64 * self.cell
                > 4.0 * ((self.bbox.1 - self.bbox.0) + (self.bbox.3 - self.bbox.2) + self.cell)
            {
                return best.map(|(i, _)| (i, (points[i] - z).norm()));
            }
        }
    }

    /// Indices of all points within `radius` of `z`, ascending.
    pub fn within(&self, points: &[Complex64], z: Complex64, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let reach = (radius / self.cell).ceil() as i64 + 1;
        let (kx, ky) = Self::key(z, self.cell);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if let Some(bucket) = self.map.get(&(kx + dx, ky + dy)) {
                    for &i in bucket {
                        if (points[i as usize] - z).norm() <= radius {
                            out.push(i as usize);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// An ordered point grid registered to one fiber of the orbit.
#[derive(Debug, Clone)]
pub struct FiberGrid {
    pub fiber: usize,
    pub points: Vec<Complex64>,
    /// Median nearest-neighbor spacing; the scale that separates in-support
    /// interpolation from flagged extrapolation.
    pub spacing: f64,
    index: SpatialIndex,
}

impl FiberGrid {
    pub fn new(fiber: usize, points: Vec<Complex64>, cell_hint: f64) -> Self {
        let index = SpatialIndex::build(&points, cell_hint);
        let spacing = if points.len() > 1 {
            let mut gaps: Vec<f64> = points
                .iter()
                .enumerate()
                .map(|(i, &z)| {
                    index
                        .within(&points, z, cell_hint * 4.0)
                        .into_iter()
                        .filter(|&j| j != i)
                        .map(|j| (points[j] - z).norm())
                        .fold(f64::INFINITY, f64::min)
                })
                .filter(|d| d.is_finite())
                .collect();
            if gaps.is_empty() {
                cell_hint
            } else {
                gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
                gaps[gaps.len() / 2]
            }
        } else {
            cell_hint
        };
        FiberGrid {
            fiber,
            points,
            spacing,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, z: Complex64) -> Option<(usize, f64)> {
        self.index.nearest(&self.points, z)
    }

    pub fn within(&self, z: Complex64, radius: f64) -> Vec<usize> {
        self.index.within(&self.points, z, radius)
    }

    /// All unordered point pairs within distance `delta`, as
    /// `(i, j, |z_i - z_j|)` with `i < j`.
    pub fn close_pairs(&self, delta: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, &z) in self.points.iter().enumerate() {
            for j in self.index.within(&self.points, z, delta) {
                if j > i {
                    let d = (self.points[j] - z).norm();
                    if d > 0.0 {
                        out.push((i, j, d));
                    }
                }
            }
        }
        out
    }

    /// Uniform probability measure on the grid points inside `𝔻̄(0, radius)`.
    pub fn uniform_measure_within(&self, radius: f64) -> Result<GridMeasure> {
        let mut weights = vec![0.0; self.len()];
        let mut count = 0usize;
        for (i, z) in self.points.iter().enumerate() {
            if z.norm() <= radius {
                weights[i] = 1.0;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::ZeroMass);
        }
        let w = 1.0 / count as f64;
        for x in &mut weights {
            *x *= w;
        }
        Ok(GridMeasure {
            fiber: self.fiber,
            weights,
        })
    }
}

/// A real-valued function sampled on a fiber grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub fiber: usize,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn constant(grid: &FiberGrid, value: f64) -> Self {
        GridDensity {
            fiber: grid.fiber,
            values: vec![value; grid.len()],
        }
    }

    /// Sample a pointwise function of the grid positions.
    pub fn from_fn(grid: &FiberGrid, f: impl Fn(Complex64) -> f64) -> Self {
        GridDensity {
            fiber: grid.fiber,
            values: grid.points.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn check_grid(&self, grid: &FiberGrid) -> Result<()> {
        if self.fiber != grid.fiber || self.values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.fiber,
                got: self.fiber,
            });
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise linear combination `a·self + b·other`.
    pub fn axpy(&self, a: f64, other: &GridDensity, b: f64) -> Result<GridDensity> {
        if self.fiber != other.fiber || self.values.len() != other.values.len() {
            return Err(Error::GridMismatch {
                expected: self.fiber,
                got: other.fiber,
            });
        }
        Ok(GridDensity {
            fiber: self.fiber,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn scale(&self, a: f64) -> GridDensity {
        GridDensity {
            fiber: self.fiber,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }
}

/// A nonnegative atomic measure on a fiber grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub fiber: usize,
    pub weights: Vec<f64>,
}

impl GridMeasure {
    pub fn check_grid(&self, grid: &FiberGrid) -> Result<()> {
        if self.fiber != grid.fiber || self.weights.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.fiber,
                got: self.fiber,
            });
        }
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Rescale to total mass one.
    pub fn normalized(&self) -> Result<GridMeasure> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(GridMeasure {
            fiber: self.fiber,
            weights: self.weights.iter().map(|w| w / m).collect(),
        })
    }

    /// `∫ g dν` over the shared grid.
    pub fn integrate(&self, g: &GridDensity) -> Result<f64> {
        if self.fiber != g.fiber || self.weights.len() != g.values.len() {
            return Err(Error::GridMismatch {
                expected: self.fiber,
                got: g.fiber,
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&g.values)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// Mass inside the closed disk of radius `r`.
    pub fn mass_within(&self, grid: &FiberGrid, r: f64) -> Result<f64> {
        self.check_grid(grid)?;
        Ok(self
            .weights
            .iter()
            .zip(&grid.points)
            .filter(|(_, z)| z.norm() <= r)
            .map(|(w, _)| w)
            .sum())
    }
}

/// Bounded-Lipschitz (Fortet–Mourier) distance between two measures on
/// possibly different grids, through a fixed dictionary of 1-Lipschitz test
/// functions bounded by one:
///
/// * cone bumps `z ↦ max(0, 1 − |z − c|)` for centers `c` on a fixed lattice
///   covering the disk of radius `extent`;
/// * the four half-plane ramps `z ↦ clamp(±Re z, ±Im z; scaled)`.
///
/// The dictionary is deterministic, so the gauge is reproducible bit for bit.
pub fn bounded_lipschitz(
    grid_a: &FiberGrid,
    a: &GridMeasure,
    grid_b: &FiberGrid,
    b: &GridMeasure,
    extent: f64,
    spacing: f64,
) -> Result<f64> {
    a.check_grid(grid_a)?;
    b.check_grid(grid_b)?;
    let mut worst = 0.0f64;
    let mut probe = |f: &dyn Fn(Complex64) -> f64| {
        let ia: f64 = grid_a
            .points
            .iter()
            .zip(&a.weights)
            .map(|(&z, &w)| w * f(z))
            .sum();
        let ib: f64 = grid_b
            .points
            .iter()
            .zip(&b.weights)
            .map(|(&z, &w)| w * f(z))
            .sum();
        worst = worst.max((ia - ib).abs());
    };
    let steps = (2.0 * extent / spacing).ceil() as i64;
    for i in 0..=steps {
        for j in 0..=steps {
            let c = Complex64::new(-extent + i as f64 * spacing, -extent + j as f64 * spacing);
            if c.norm() > extent + spacing {
                continue;
            }
            probe(&move |z: Complex64| (1.0 - (z - c).norm()).max(0.0));
        }
    }
    let scale = 1.0 / extent.max(1.0);
    probe(&|z: Complex64| (z.re * scale).clamp(-1.0, 1.0));
    probe(&|z: Complex64| (-z.re * scale).clamp(-1.0, 1.0));
    probe(&|z: Complex64| (z.im * scale).clamp(-1.0, 1.0));
    probe(&|z: Complex64| (z.norm() * scale).clamp(-1.0, 1.0));
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn demo_grid() -> FiberGrid {
        let pts: Vec<Complex64> = (0..50)
            .map(|i| c((i % 10) as f64 * 0.3, (i / 10) as f64 * 0.3))
            .collect();
        FiberGrid::new(0, pts, 0.3)
    }

    #[test]
    fn nearest_finds_the_right_point() {
        let grid = demo_grid();
        let (i, d) = grid.nearest(c(0.31, 0.02)).unwrap();
        assert_eq!(i, 1);
        assert!(d < 0.05);
        // far queries still resolve
        let (j, dj) = grid.nearest(c(100.0, 100.0)).unwrap();
        assert_eq!(j, 49);
        assert!(dj > 100.0);
    }

    #[test]
    fn nearest_matches_brute_force() {
        let grid = demo_grid();
        for &q in &[c(0.1, 0.1), c(1.4, 0.9), c(-0.5, 2.0), c(2.0, -1.0)] {
            let (i, d) = grid.nearest(q).unwrap();
            let (bi, bd) = grid
                .points
                .iter()
                .enumerate()
                .map(|(i, &z)| (i, (z - q).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assert!((d - bd).abs() < 1e-12);
            assert_eq!(i, bi);
        }
    }

    #[test]
    fn within_radius() {
        let grid = demo_grid();
        let hits = grid.within(c(0.0, 0.0), 0.35);
        assert_eq!(hits, vec![0, 1, 10]);
    }

    #[test]
    fn measure_normalization_and_integration() {
        let grid = demo_grid();
        let nu = grid.uniform_measure_within(0.65).unwrap();
        assert!((nu.mass() - 1.0).abs() < 1e-12);
        let g = GridDensity::constant(&grid, 3.0);
        assert!((nu.integrate(&g).unwrap() - 3.0).abs() < 1e-12);
        let zero = GridMeasure {
            fiber: 0,
            weights: vec![0.0; grid.len()],
        };
        assert!(matches!(zero.normalized(), Err(Error::ZeroMass)));
    }

    #[test]
    fn grid_mismatch_is_detected() {
        let grid = demo_grid();
        let g = GridDensity {
            fiber: 1,
            values: vec![0.0; grid.len()],
        };
        assert!(matches!(
            g.check_grid(&grid),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn bounded_lipschitz_separates_and_vanishes() {
        let grid = demo_grid();
        let nu = grid.uniform_measure_within(10.0).unwrap();
        let same = bounded_lipschitz(&grid, &nu, &grid, &nu, 3.0, 0.5).unwrap();
        assert_eq!(same, 0.0);
        // a point mass far from uniform has positive distance
        let mut w = vec![0.0; grid.len()];
        w[0] = 1.0;
        let delta = GridMeasure { fiber: 0, weights: w };
        let d = bounded_lipschitz(&grid, &nu, &grid, &delta, 3.0, 0.5).unwrap();
        assert!(d > 0.1, "d = {d}");
    }
}
