use crate::error::{Error, Result};

/// Uniform tensor grid in one or two dimensions.
///
/// Node `(i0, i1)` sits at `lower + (i0 * h0, i1 * h1)` and is stored at flat
/// index `i0 * counts[1] + i1`, so the first axis varies slowest. A 1D grid
/// has `counts[1] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    spacing: [f64; 2],
    lower: [f64; 2],
    counts: [usize; 2],
}

fn count_for(name: &'static str, lower: f64, upper: f64, h: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", format!("spacing must be > 0, got {h}")));
    }
    if !(lower.is_finite() && upper.is_finite() && upper > lower) {
        return Err(Error::param(name, format!("need lower < upper, got [{lower}, {upper}]")));
    }
    let steps = (upper - lower) / h;
    let rounded = steps.round();
    if (steps - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::param(name, format!("extent {} is not a multiple of h = {h}", upper - lower)));
    }
    let count = rounded as usize + 1;
    if count < 3 {
        return Err(Error::param(name, format!("need at least 3 points per axis, got {count}")));
    }
    Ok(count)
}

impl Grid {
    /// Node grid on `[lower, upper]` including both endpoints.
    pub fn line(lower: f64, upper: f64, h: f64) -> Result<Self> {
        let n = count_for("grid", lower, upper, h)?;
        Ok(Self { dim: 1, spacing: [h, h], lower: [lower, 0.0], counts: [n, 1] })
    }

    /// Node grid on the box `[lower, upper]` with equal spacing on both axes.
    pub fn rect(lower: [f64; 2], upper: [f64; 2], h: f64) -> Result<Self> {
        let n0 = count_for("grid", lower[0], upper[0], h)?;
        let n1 = count_for("grid", lower[1], upper[1], h)?;
        Ok(Self { dim: 2, spacing: [h, h], lower, counts: [n0, n1] })
    }

    /// `cells` cell centres of a uniform partition of `[a, b]`.
    pub fn cell_centered_line(a: f64, b: f64, cells: usize) -> Result<Self> {
        if cells < 3 || !(b > a) {
            return Err(Error::param("cells", format!("need b > a and >= 3 cells, got [{a}, {b}] with {cells}")));
        }
        let h = (b - a) / cells as f64;
        Ok(Self { dim: 1, spacing: [h, h], lower: [a + 0.5 * h, 0.0], counts: [cells, 1] })
    }

    /// Cell centres of a `cells[0] x cells[1]` partition of `[a, b]`; spacing may
    /// differ between axes.
    pub fn cell_centered_rect(a: [f64; 2], b: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        if cells.iter().any(|&c| c < 3) || !(b[0] > a[0] && b[1] > a[1]) {
            return Err(Error::param("cells", format!("need a non-empty box and >= 3 cells per axis, got {cells:?}")));
        }
        let h = [(b[0] - a[0]) / cells[0] as f64, (b[1] - a[1]) / cells[1] as f64];
        Ok(Self { dim: 2, spacing: h, lower: [a[0] + 0.5 * h[0], a[1] + 0.5 * h[1]], counts: cells })
    }

    /// Rebuilds a grid from its lower corner, per-axis spacing and counts.
    pub fn from_parts(dim: usize, lower: [f64; 2], spacing: [f64; 2], counts: [usize; 2]) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::DimensionMismatch { expected: 2, actual: dim });
        }
        let axes = &counts[..dim];
        if axes.iter().any(|&c| c < 3) || (dim == 1 && counts[1] != 1) {
            return Err(Error::param("grid", format!("need at least 3 points per axis, got {counts:?}")));
        }
        if spacing[..dim].iter().any(|h| !(h.is_finite() && *h > 0.0)) || lower[..dim].iter().any(|l| !l.is_finite()) {
            return Err(Error::param("grid", format!("bad spacing {spacing:?} or lower corner {lower:?}")));
        }
        let spacing = if dim == 1 { [spacing[0], spacing[0]] } else { spacing };
        let lower = if dim == 1 { [lower[0], 0.0] } else { lower };
        Ok(Self { dim, spacing, lower, counts })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Spacing along the first axis.
    pub fn h(&self) -> f64 {
        self.spacing[0]
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn is_isotropic(&self) -> bool {
        self.dim == 1 || self.spacing[0] == self.spacing[1]
    }

    /// Quadrature weight of a node (`h^n`).
    pub fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.spacing[0]
        } else {
            self.spacing[0] * self.spacing[1]
        }
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.lower[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.lower[axis] + (self.counts[axis] - 1) as f64 * self.spacing[axis]
    }

    pub fn index(&self, i0: usize, i1: usize) -> usize {
        i0 * self.counts[1] + i1
    }

    pub fn multi_index(&self, i: usize) -> (usize, usize) {
        (i / self.counts[1], i % self.counts[1])
    }

    pub fn coord(&self, axis_index: usize, axis: usize) -> f64 {
        self.lower[axis] + axis_index as f64 * self.spacing[axis]
    }

    /// Coordinates of flat node `i`; the second entry is 0 in 1D.
    pub fn point(&self, i: usize) -> [f64; 2] {
        let (i0, i1) = self.multi_index(i);
        [self.coord(i0, 0), if self.dim == 2 { self.coord(i1, 1) } else { 0.0 }]
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Largest distance between two nodes.
    pub fn diameter(&self) -> f64 {
        let d0 = self.upper(0) - self.lower(0);
        if self.dim == 1 {
            d0
        } else {
            d0.hypot(self.upper(1) - self.lower(1))
        }
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "grid {:?}x{:?} (h={:?}) vs {:?}x{:?} (h={:?})",
                self.counts, self.lower, self.spacing, other.counts, other.lower, other.spacing
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_counts_and_bounds() {
        let g = Grid::line(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.point(0)[0], -1.0);
        assert_eq!(g.upper(0), 1.0);
        let g = Grid::line(-6.0, 6.0, 0.01).unwrap();
        assert_eq!(g.len(), 1201);
    }

    #[test]
    fn rejects_inconsistent_spacing() {
        assert!(Grid::line(0.0, 1.0, 0.3).is_err());
        assert!(Grid::line(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rect_flat_layout() {
        let g = Grid::rect([-1.0, 0.0], [1.0, 1.0], 0.5).unwrap();
        assert_eq!(g.counts(), [5, 3]);
        let i = g.index(2, 1);
        assert_eq!(g.multi_index(i), (2, 1));
        assert_eq!(g.point(i), [0.0, 0.5]);
    }

    #[test]
    fn cell_centres() {
        let g = Grid::cell_centered_rect([0.0, -1.0], [0.1, 1.0], [4, 8]).unwrap();
        assert_eq!(g.len(), 32);
        assert!((g.point(0)[0] - 0.0125).abs() < 1e-15);
        assert!((g.cell_volume() - 0.025 * 0.25).abs() < 1e-15);
        assert!(!g.is_isotropic());
    }
}
