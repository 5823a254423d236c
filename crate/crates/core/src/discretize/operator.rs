use rayon::prelude::*;

use super::field::ScalarField;
use super::grid::Grid;
use crate::error::{Error, Result};
use crate::kernels::{RadialKernel, RadialProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorMode {
    /// Integration over the whole space; mass beyond the box couples to the
    /// far-field constants along the first axis.
    FullSpace,
    /// Integration truncated at the box boundary.
    Regional,
}

impl OperatorMode {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "full_space" | "full-space" => Some(Self::FullSpace),
            "regional" => Some(Self::Regional),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::FullSpace => "full_space",
            Self::Regional => "regional",
        }
    }
}

#[derive(Debug, Clone)]
enum Storage {
    /// Row-major `N x N` weights with the half-open column band holding the
    /// non-zeros of each row.
    Dense { weights: Vec<f64>, band: Vec<(usize, usize)> },
    /// Offsets `(a, b, w)` shared by every row of a 2D grid. Out-of-box
    /// transverse offsets clamp to the boundary row in full-space mode and
    /// are dropped in regional mode.
    Stencil { offsets: Vec<(isize, isize, f64)> },
}

/// Midpoint-rule discretization of `Lu(x) = ∫ ρ(z-x)(u(z)-u(x)) dz`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    mode: OperatorMode,
    grid: Grid,
    storage: Storage,
    tail_left: Vec<f64>,
    tail_right: Vec<f64>,
    row_mass: Vec<f64>,
}

/// Assembles `kernel` on `grid`. Fractional kernels without an inner cutoff
/// are regularized at one grid spacing.
pub fn assemble_operator(kernel: &RadialKernel, grid: &Grid, mode: OperatorMode) -> Result<DiscreteOperator> {
    let kernel = kernel.clone().with_default_inner_cutoff(grid.h());
    assemble_profile(&kernel, grid, mode)
}

/// Assembles any radial profile (including marginal kernels) on `grid`.
pub fn assemble_profile<K: RadialProfile>(kernel: &K, grid: &Grid, mode: OperatorMode) -> Result<DiscreteOperator> {
    if kernel.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), actual: kernel.dim() });
    }
    if !grid.is_isotropic() {
        return Err(Error::Unsupported("operator assembly needs equal spacing on every axis".into()));
    }
    let h = grid.h();
    if let Some(scale) = kernel.resolution_scale() {
        if scale < h {
            return Err(Error::KernelUnresolved { support: scale, spacing: h });
        }
    }
    match grid.dim() {
        1 => Ok(assemble_1d(kernel, grid, mode)),
        _ => assemble_2d(kernel, grid, mode),
    }
}

fn assemble_1d<K: RadialProfile>(kernel: &K, grid: &Grid, mode: OperatorMode) -> DiscreteOperator {
    let n = grid.len();
    let h = grid.h();
    let (reach_steps, remainder) = match kernel.reach() {
        Some(r) => ((r / h).ceil() as usize + 1, 0.0),
        None => (n - 1, kernel.half_space_mass((n as f64 - 0.5) * h)),
    };
    let step_weight: Vec<f64> = (0..=reach_steps).map(|k| if k == 0 { 0.0 } else { kernel.profile(k as f64 * h) * h }).collect();
    let support = step_weight.iter().rposition(|&w| w > 0.0).unwrap_or(0);

    let mut weights = vec![0.0; n * n];
    let mut band = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(support);
        let hi = (i + support + 1).min(n);
        let row = &mut weights[i * n..(i + 1) * n];
        for (j, w) in row.iter_mut().enumerate().take(hi).skip(lo) {
            *w = step_weight[i.abs_diff(j)];
        }
        band.push((lo, hi));
    }

    let (mut tail_left, mut tail_right) = (vec![0.0; n], vec![0.0; n]);
    if mode == OperatorMode::FullSpace {
        for i in 0..n {
            // offsets k > i leave the box on the left, k > n-1-i on the right
            tail_left[i] = step_weight.iter().skip(i + 1).sum::<f64>() + remainder;
            tail_right[i] = step_weight.iter().skip(n - i).sum::<f64>() + remainder;
        }
    }
    let row_mass = (0..n)
        .map(|i| {
            let (lo, hi) = band[i];
            weights[i * n + lo..i * n + hi].iter().sum::<f64>() + tail_left[i] + tail_right[i]
        })
        .collect();
    DiscreteOperator { mode, grid: grid.clone(), storage: Storage::Dense { weights, band }, tail_left, tail_right, row_mass }
}

fn assemble_2d<K: RadialProfile>(kernel: &K, grid: &Grid, mode: OperatorMode) -> Result<DiscreteOperator> {
    let h = grid.h();
    let [n0, n1] = grid.counts();
    let reach_steps = match (kernel.reach(), mode) {
        (Some(r), _) => (r / h).ceil() as isize + 1,
        (None, OperatorMode::Regional) => n0.max(n1) as isize,
        (None, OperatorMode::FullSpace) => {
            return Err(Error::Unsupported("full-space 2D assembly needs a kernel with bounded reach".into()))
        }
    };
    let cell = h * h;
    let mut offsets = Vec::new();
    for a in -reach_steps..=reach_steps {
        for b in -reach_steps..=reach_steps {
            if a == 0 && b == 0 {
                continue;
            }
            let w = kernel.profile(h * (a as f64).hypot(b as f64)) * cell;
            if w > 0.0 {
                offsets.push((a, b, w));
            }
        }
    }

    let len = grid.len();
    let (mut tail_left, mut tail_right) = (vec![0.0; len], vec![0.0; len]);
    if mode == OperatorMode::FullSpace {
        for i0 in 0..n0 {
            let (mut left, mut right) = (0.0, 0.0);
            for &(a, _, w) in &offsets {
                let j0 = i0 as isize + a;
                if j0 < 0 {
                    left += w;
                } else if j0 >= n0 as isize {
                    right += w;
                }
            }
            for i1 in 0..n1 {
                let i = grid.index(i0, i1);
                tail_left[i] = left;
                tail_right[i] = right;
            }
        }
    }
    let mut op = DiscreteOperator {
        mode,
        grid: grid.clone(),
        storage: Storage::Stencil { offsets },
        tail_left,
        tail_right,
        row_mass: Vec::new(),
    };
    op.row_mass = (0..len)
        .map(|i| {
            let mut m = 0.0;
            op.for_each_entry(i, |_, w| m += w);
            m + op.tail_left[i] + op.tail_right[i]
        })
        .collect();
    Ok(op)
}

impl DiscreteOperator {
    pub fn mode(&self) -> OperatorMode {
        self.mode
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `m_i`: sum of in-box weights plus tail masses.
    pub fn row_mass(&self) -> &[f64] {
        &self.row_mass
    }

    pub fn max_row_mass(&self) -> f64 {
        self.row_mass.iter().fold(0.0, |m: f64, &v| m.max(v))
    }

    /// Left and right far-field tail masses of row `i`.
    pub fn tails(&self, i: usize) -> (f64, f64) {
        (self.tail_left[i], self.tail_right[i])
    }

    /// Visits the in-box entries `(j, w_ij)` of row `i` in a fixed order.
    fn for_each_entry(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match &self.storage {
            Storage::Dense { weights, band } => {
                let n = self.grid.len();
                let (lo, hi) = band[i];
                for j in lo..hi {
                    if j != i {
                        f(j, weights[i * n + j]);
                    }
                }
            }
            Storage::Stencil { offsets } => {
                let [n0, n1] = self.grid.counts();
                let (i0, i1) = self.grid.multi_index(i);
                for &(a, b, w) in offsets {
                    let j0 = i0 as isize + a;
                    if j0 < 0 || j0 >= n0 as isize {
                        continue;
                    }
                    let mut j1 = i1 as isize + b;
                    if j1 < 0 || j1 >= n1 as isize {
                        match self.mode {
                            OperatorMode::Regional => continue,
                            OperatorMode::FullSpace => j1 = j1.clamp(0, n1 as isize - 1),
                        }
                    }
                    f(self.grid.index(j0 as usize, j1 as usize), w);
                }
            }
        }
    }

    /// Aggregated in-box weight between nodes `i` and `j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let mut total = 0.0;
        self.for_each_entry(i, |k, w| {
            if k == j {
                total += w;
            }
        });
        total
    }

    /// `(Lu)_i = Σ_j w_ij (u_j - u_i) + t⁻_i (u₋ - u_i) + t⁺_i (u₊ - u_i)`.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        self.grid.check_same(&u.grid)?;
        let far = self.far_field_for(u.far_field)?;
        let mut out = vec![0.0; u.values.len()];
        self.apply_into(&u.values, far, &mut out);
        Ok(ScalarField { grid: u.grid.clone(), values: out, time: u.time, far_field: None })
    }

    pub(crate) fn far_field_for(&self, far: Option<(f64, f64)>) -> Result<(f64, f64)> {
        match (self.mode, far) {
            (OperatorMode::FullSpace, Some(f)) => Ok(f),
            (OperatorMode::FullSpace, None) => {
                Err(Error::GridMismatch("full-space operator needs far-field values on the field".into()))
            }
            (OperatorMode::Regional, _) => Ok((0.0, 0.0)),
        }
    }

    /// Raw application on a value slice; `far` is ignored in regional mode.
    pub fn apply_into(&self, values: &[f64], far: (f64, f64), out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.grid.len());
        let full = self.mode == OperatorMode::FullSpace;
        out.par_iter_mut().enumerate().with_min_len(64).for_each(|(i, o)| {
            let ui = values[i];
            let mut acc = 0.0;
            self.for_each_entry(i, |j, w| acc += w * (values[j] - ui));
            if full {
                acc += self.tail_left[i] * (far.0 - ui) + self.tail_right[i] * (far.1 - ui);
            }
            *o = acc;
        });
    }

    /// Dense matrix of the homogeneous part of `L` (row-major): off-diagonal
    /// `w_ij`, diagonal `-m_i`.
    pub fn dense_generator(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            self.for_each_entry(i, |j, w| a[i * n + j] += w);
            a[i * n + i] = -self.row_mass[i];
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::sample_function_to_field;

    fn indicator_line(delta: f64, h: f64, half: f64, mode: OperatorMode) -> DiscreteOperator {
        let k = RadialKernel::indicator(1, delta).unwrap();
        let g = Grid::line(-half, half, h).unwrap();
        assemble_operator(&k, &g, mode).unwrap()
    }

    #[test]
    fn constants_annihilated_exactly() {
        for mode in [OperatorMode::FullSpace, OperatorMode::Regional] {
            let op = indicator_line(0.5, 0.05, 2.0, mode);
            let u = ScalarField::constant(op.grid(), 0.37, Some((0.37, 0.37)));
            let lu = op.apply(&u).unwrap();
            assert!(lu.values.iter().all(|&v| v == 0.0));
        }
        let k = RadialKernel::gaussian(2, 0.3).unwrap();
        let g = Grid::rect([-1.0, -1.0], [1.0, 1.0], 0.1).unwrap();
        for mode in [OperatorMode::FullSpace, OperatorMode::Regional] {
            let op = assemble_operator(&k, &g, mode).unwrap();
            let u = ScalarField::constant(&g, -0.8, Some((-0.8, -0.8)));
            assert!(op.apply(&u).unwrap().values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn linear_field_interior_vanishes() {
        let op = indicator_line(0.5, 0.01, 2.0, OperatorMode::FullSpace);
        let u = sample_function_to_field(|x| x[0], op.grid(), Some((-2.0, 2.0))).unwrap();
        let lu = op.apply(&u).unwrap();
        let mid = op.grid().len() / 2;
        for i in mid - 50..mid + 50 {
            assert!(lu.values[i].abs() < 1e-12, "{}", lu.values[i]);
        }
    }

    #[test]
    fn quadratic_converges_to_delta_squared_over_three() {
        // ∫ρ(z) z² dz = δ²/3 for ρ = χ/(2δ)
        let exact = 0.25 / 3.0;
        let mut errs = Vec::new();
        for h in [0.02, 0.01, 0.005] {
            let op = indicator_line(0.5, h, 1.0, OperatorMode::FullSpace);
            let u = sample_function_to_field(|x| x[0] * x[0], op.grid(), Some((1.0, 1.0))).unwrap();
            let lu = op.apply(&u).unwrap();
            errs.push((lu.values[op.grid().len() / 2] - exact).abs());
        }
        assert!(errs[2] < 1e-2 && errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
        // first-order: halving h roughly halves the error
        assert!(errs[0] / errs[1] > 1.6 && errs[1] / errs[2] > 1.6, "{errs:?}");
    }

    #[test]
    fn weights_symmetric_and_nonnegative() {
        let op = indicator_line(0.3, 0.05, 1.0, OperatorMode::Regional);
        let n = op.grid().len();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(op.weight(i, j).to_bits(), op.weight(j, i).to_bits());
                assert!(op.weight(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn unresolved_indicator_rejected() {
        let k = RadialKernel::indicator(1, 0.005).unwrap();
        let g = Grid::line(-1.0, 1.0, 0.01).unwrap();
        assert!(matches!(assemble_operator(&k, &g, OperatorMode::Regional), Err(Error::KernelUnresolved { .. })));
    }

    #[test]
    fn full_space_row_mass_uniform() {
        let op = indicator_line(0.5, 0.01, 1.0, OperatorMode::FullSpace);
        let m0 = op.row_mass()[0];
        assert!(op.row_mass().iter().all(|m| (m - m0).abs() < 1e-12));
        assert!((m0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fractional_tail_includes_remainder() {
        let k = RadialKernel::fractional(1, 0.25, Some(0.1), None).unwrap().with_normalization(1.0).unwrap();
        let g = Grid::line(-1.0, 1.0, 0.001).unwrap();
        let op = assemble_operator(&k, &g, OperatorMode::FullSpace).unwrap();
        let expected = 4.0 / 0.1f64.sqrt();
        let m = op.max_row_mass();
        assert!((m - expected).abs() / expected < 0.02, "{m}");
    }

    #[test]
    fn grid_mismatch_rejected() {
        let op = indicator_line(0.5, 0.05, 1.0, OperatorMode::Regional);
        let other = Grid::line(-1.0, 1.0, 0.1).unwrap();
        assert!(op.apply(&ScalarField::constant(&other, 0.0, None)).is_err());
    }

    #[test]
    fn maximum_principle_at_argmax() {
        let op = indicator_line(0.4, 0.02, 1.0, OperatorMode::Regional);
        let u = sample_function_to_field(|x| (3.0 * x[0]).sin() * (-x[0] * x[0]).exp(), op.grid(), None).unwrap();
        let lu = op.apply(&u).unwrap();
        let arg = (0..u.values.len()).max_by(|&a, &b| u.values[a].total_cmp(&u.values[b])).unwrap();
        assert!(lu.values[arg] <= 0.0);
    }
}
