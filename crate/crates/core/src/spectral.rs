//! Regional fractional Dirichlet form, Rayleigh quotients, eigenpairs and
//! oscillation decay fits.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::discretize::{DiscreteOperator, Grid, OperatorMode, ScalarField};
use crate::error::{Error, Result};
use crate::evolve::Trajectory;

/// Largest node count the dense eigensolver handles.
pub const DENSE_LIMIT: usize = 1500;
/// Largest node count for which the form matrix is assembled.
pub const ASSEMBLY_LIMIT: usize = 4096;

/// Piecewise-constant discretization of
/// `E[u] = (c_n/2) ∬ (u(x) - u(y))² / |x - y|^{n+2s}` on a cell-centred box.
#[derive(Debug, Clone)]
pub struct FormSpec {
    grid: Grid,
    order: f64,
    cn: f64,
}

impl FormSpec {
    pub fn new(grid: Grid, order: f64, cn: f64) -> Result<Self> {
        if !(order > 0.0 && order < 1.0) {
            return Err(Error::param("s", format!("must lie in (0,1), got {order}")));
        }
        if !(cn.is_finite() && cn > 0.0) {
            return Err(Error::param("cn", format!("must be positive, got {cn}")));
        }
        Ok(Self { grid, order, cn })
    }

    /// `[a, b]` split into `cells` cells.
    pub fn interval(a: f64, b: f64, cells: usize, order: f64, cn: f64) -> Result<Self> {
        Self::new(Grid::cell_centered_line(a, b, cells)?, order, cn)
    }

    /// `[0, length] x [-eps, eps]` split into `cells_x x cells_y` cells.
    pub fn rectangle(length: f64, eps: f64, cells_x: usize, cells_y: usize, order: f64, cn: f64) -> Result<Self> {
        Self::new(Grid::cell_centered_rect([0.0, -eps], [length, eps], [cells_x, cells_y])?, order, cn)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn cn(&self) -> f64 {
        self.cn
    }

    /// `|d|^{-(n+2s)}` indexed by the absolute index offset, zero at the origin.
    fn offset_kernel(&self) -> OffsetKernel {
        let [n0, n1] = self.grid.counts();
        let [h0, h1] = self.grid.spacing();
        let expo = -0.5 * (self.grid.dim() as f64 + 2.0 * self.order);
        let mut values = vec![0.0; n0 * n1];
        for a in 0..n0 {
            for b in 0..n1 {
                if a + b > 0 {
                    let (x, y) = (a as f64 * h0, b as f64 * h1);
                    values[a * n1 + b] = (x * x + y * y).powf(expo);
                }
            }
        }
        OffsetKernel { n1, values, grid: self.grid.clone() }
    }
}

struct OffsetKernel {
    n1: usize,
    values: Vec<f64>,
    grid: Grid,
}

impl OffsetKernel {
    fn at(&self, i: usize, j: usize) -> f64 {
        let (i0, i1) = self.grid.multi_index(i);
        let (j0, j1) = self.grid.multi_index(j);
        self.values[i0.abs_diff(j0) * self.n1 + i1.abs_diff(j1)]
    }
}

/// Double midpoint sum over distinct cells.
pub fn energy_form(u: &ScalarField, spec: &FormSpec) -> Result<f64> {
    spec.grid.check_same(&u.grid)?;
    Ok(energy_values(&u.values, spec))
}

fn energy_values(v: &[f64], spec: &FormSpec) -> f64 {
    let kernel = spec.offset_kernel();
    let n = v.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in i + 1..n {
                let d = v[i] - v[j];
                acc += kernel.at(i, j) * d * d;
            }
            acc
        })
        .collect();
    let vol = spec.grid.cell_volume();
    // the ordered double sum is twice the unordered one, cancelling the 1/2
    spec.cn * vol * vol * rows.iter().sum::<f64>()
}

/// `E[u] / ‖u‖²` for mean-zero `u`.
pub fn rayleigh_quotient(u: &ScalarField, spec: &FormSpec) -> Result<f64> {
    spec.grid.check_same(&u.grid)?;
    let vol = spec.grid.cell_volume();
    let mean = u.values.iter().sum::<f64>() * vol;
    let l1 = u.values.iter().map(|v| v.abs()).sum::<f64>() * vol;
    if l1 == 0.0 || mean.abs() > 1e-8 * l1 {
        return Err(Error::InadmissibleTrial(format!("integral {mean} is not zero relative to L1 norm {l1}")));
    }
    let norm2 = u.values.iter().map(|v| v * v).sum::<f64>() * vol;
    Ok(energy_values(&u.values, spec) / norm2)
}

/// Row-major `A` with `uᵀ A u = E[u]`: `A = c_n V² (D - K)`.
pub fn form_matrix(spec: &FormSpec) -> Result<Vec<f64>> {
    let n = spec.grid.len();
    if n > ASSEMBLY_LIMIT {
        return Err(Error::TooLarge { nodes: n, limit: ASSEMBLY_LIMIT });
    }
    let kernel = spec.offset_kernel();
    let vol = spec.grid.cell_volume();
    let scale = spec.cn * vol * vol;
    let mut a = vec![0.0; n * n];
    a.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let mut diag = 0.0;
        for (j, x) in row.iter_mut().enumerate() {
            if j != i {
                let k = kernel.at(i, j);
                *x = -scale * k;
                diag += k;
            }
        }
        row[i] = scale * diag;
    });
    Ok(a)
}

/// Ascending eigenpairs with `M`-orthonormal eigenvectors, `M = V·I`.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub cell_volume: f64,
    pub method: &'static str,
}

impl SpectralReport {
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }
}

/// Lowest `k` eigenpairs of the form on `spec`'s grid.
pub fn lambda2(spec: &FormSpec, k: usize) -> Result<SpectralReport> {
    let n = spec.grid.len();
    let a = form_matrix(spec)?;
    let vol = spec.grid.cell_volume();
    let b: Vec<f64> = a.iter().map(|x| x / vol).collect();
    if n <= DENSE_LIMIT {
        dense_eigen(&b, n, k, vol)
    } else {
        lanczos(&b, n, k, vol, 0)
    }
}

/// Eigenpairs of `-L` for an assembled regional operator (mass matrix `hⁿ I`).
pub fn generator_spectrum(op: &DiscreteOperator, k: usize) -> Result<SpectralReport> {
    if op.mode() != OperatorMode::Regional {
        return Err(Error::Unsupported("generator spectrum needs a regional operator".into()));
    }
    let n = op.grid().len();
    if n > ASSEMBLY_LIMIT {
        return Err(Error::TooLarge { nodes: n, limit: ASSEMBLY_LIMIT });
    }
    let b: Vec<f64> = op.dense_generator().iter().map(|x| -x).collect();
    let vol = op.grid().cell_volume();
    if n <= DENSE_LIMIT {
        dense_eigen(&b, n, k, vol)
    } else {
        lanczos(&b, n, k, vol, 0)
    }
}

fn fix_sign(v: &mut [f64]) {
    let idx = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
    if v[idx] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense_eigen(b: &[f64], n: usize, k: usize, vol: f64) -> Result<SpectralReport> {
    let m = DMatrix::from_row_slice(n, n, b);
    let eig = SymmetricEigen::try_new(m, 1e-14, 0).ok_or_else(|| Error::Eigen("dense solve did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let k = k.min(n);
    let scale = 1.0 / vol.sqrt();
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        eigenvalues.push(eig.eigenvalues[c]);
        let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().map(|x| x * scale).collect();
        fix_sign(&mut v);
        eigenvectors.push(v);
    }
    Ok(SpectralReport { eigenvalues, eigenvectors, cell_volume: vol, method: "dense" })
}

fn matvec(b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        *o = b[i * n..(i + 1) * n].iter().zip(x).map(|(a, y)| a * y).sum();
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Lanczos with full reorthogonalization on the complement of constants.
/// The constant pair is reported first with its Rayleigh quotient.
fn lanczos(b: &[f64], n: usize, k: usize, vol: f64, seed: u64) -> Result<SpectralReport> {
    let k = k.clamp(1, n);
    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let mut bu = vec![0.0; n];
    matvec(b, &ones, &mut bu);
    let lambda1 = dot(&ones, &bu);
    if k == 1 {
        return Ok(finish(vec![lambda1], vec![ones], vol));
    }
    let norm_b = (0..n).map(|i| b[i * n..(i + 1) * n].iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let wanted = k - 1;
    let mut m = (4 * wanted + 60).min(n - 1);
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let deflate = vec![ones.clone()];
        orthogonalize(&mut q, &deflate);
        let nrm = dot(&q, &q).sqrt();
        q.iter_mut().for_each(|x| *x /= nrm);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let (mut alpha, mut beta) = (Vec::with_capacity(m), Vec::with_capacity(m));
        let mut w = vec![0.0; n];
        let mut last_beta = 0.0;
        for _ in 0..m {
            basis.push(q.clone());
            matvec(b, &q, &mut w);
            let a = dot(&w, &q);
            alpha.push(a);
            orthogonalize(&mut w, &deflate);
            orthogonalize(&mut w, &basis);
            last_beta = dot(&w, &w).sqrt();
            if last_beta <= 1e-14 * norm_b {
                break;
            }
            beta.push(last_beta);
            q = w.iter().map(|x| x / last_beta).collect();
            // normalizing a short residual amplifies rounding; clean once more
            orthogonalize(&mut q, &deflate);
            orthogonalize(&mut q, &basis);
            let nq = dot(&q, &q).sqrt();
            q.iter_mut().for_each(|x| *x /= nq);
        }
        let size = basis.len();
        let mut t = DMatrix::zeros(size, size);
        for i in 0..size {
            t[(i, i)] = alpha[i];
            if i + 1 < size {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::try_new(t, 1e-14, 0).ok_or_else(|| Error::Eigen("tridiagonal solve failed".into()))?;
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let take = wanted.min(size);
        let converged = size < m
            || order.iter().take(take).all(|&c| (last_beta * eig.eigenvectors[(size - 1, c)]).abs() <= 1e-10 * norm_b);
        if converged || m >= n - 1 {
            if !converged {
                return Err(Error::Eigen("Lanczos did not converge".into()));
            }
            let mut values = vec![lambda1];
            let mut vectors = vec![ones.clone()];
            for &c in order.iter().take(take) {
                values.push(eig.eigenvalues[c]);
                let mut v = vec![0.0; n];
                for (j, qj) in basis.iter().enumerate() {
                    let coef = eig.eigenvectors[(j, c)];
                    v.iter_mut().zip(qj).for_each(|(x, y)| *x += coef * y);
                }
                vectors.push(v);
            }
            return Ok(finish(values, vectors, vol));
        }
        m = (2 * m).min(n - 1);
    }
}

fn finish(values: Vec<f64>, vectors: Vec<Vec<f64>>, vol: f64) -> SpectralReport {
    let scale = 1.0 / vol.sqrt();
    let eigenvectors = vectors
        .into_iter()
        .map(|v| {
            let mut v: Vec<f64> = v.iter().map(|x| x * scale).collect();
            fix_sign(&mut v);
            v
        })
        .collect();
    SpectralReport { eigenvalues: values, eigenvectors, cell_volume: vol, method: "lanczos" }
}

/// Coefficients in the eigenbasis and the relative `M`-norm reconstruction residual.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub coefficients: Vec<f64>,
    pub residual: f64,
}

pub fn expand_in_eigenbasis(values: &[f64], report: &SpectralReport) -> Result<Expansion> {
    let n = values.len();
    if let Some(v) = report.eigenvectors.first() {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: v.len(), actual: n });
        }
    }
    let vol = report.cell_volume;
    let coefficients: Vec<f64> = report.eigenvectors.iter().map(|v| vol * dot(v, values)).collect();
    let mut rest = values.to_vec();
    for (c, v) in coefficients.iter().zip(&report.eigenvectors) {
        rest.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
    }
    let norm = dot(values, values).sqrt();
    let residual = if norm == 0.0 { 0.0 } else { dot(&rest, &rest).sqrt() / norm };
    Ok(Expansion { coefficients, residual })
}

/// One counterexample row for `[0, L] x [-ε, ε]` with `u(x, y) = y`.
#[derive(Debug, Clone)]
pub struct CounterexampleRow {
    pub length: f64,
    pub energy: f64,
    pub norm2: f64,
    pub quotient: f64,
    /// Discrete λ₂ on the coarse grid, with the trial quotient on that same grid.
    pub lambda2: Option<(f64, f64)>,
    /// `4 L² ε²`.
    pub bound: f64,
    pub bound_holds: bool,
}

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub eps: f64,
    pub order: f64,
    pub cn: f64,
    pub rows: Vec<CounterexampleRow>,
    pub strictly_decreasing: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct CounterexampleGrids {
    pub cells: [usize; 2],
    pub lambda_cells: Option<[usize; 2]>,
}

fn trial_y(spec: &FormSpec) -> Result<ScalarField> {
    let g = spec.grid().clone();
    let values = g.points().map(|p| p[1]).collect();
    ScalarField::new(g, values, 0.0, None)
}

pub fn counterexample_report(eps: f64, lengths: &[f64], order: f64, cn: f64, grids: CounterexampleGrids) -> Result<CounterexampleReport> {
    let mut rows = Vec::with_capacity(lengths.len());
    for &l in lengths {
        if !(l > 0.0 && l < eps) {
            return Err(Error::param("length", format!("need 0 < L < eps, got L={l}, eps={eps}")));
        }
        let spec = FormSpec::rectangle(l, eps, grids.cells[0], grids.cells[1], order, cn)?;
        let u = trial_y(&spec)?;
        let energy = energy_form(&u, &spec)?;
        let norm2 = u.values.iter().map(|v| v * v).sum::<f64>() * spec.grid().cell_volume();
        let lambda2 = match grids.lambda_cells {
            Some([cx, cy]) => {
                let coarse = FormSpec::rectangle(l, eps, cx, cy, order, cn)?;
                let report = lambda2(&coarse, 2)?;
                let q = rayleigh_quotient(&trial_y(&coarse)?, &coarse)?;
                Some((report.lambda2(), q))
            }
            None => None,
        };
        let bound = 4.0 * l * l * eps * eps;
        rows.push(CounterexampleRow {
            length: l,
            energy,
            norm2,
            quotient: energy / norm2,
            lambda2,
            bound,
            bound_holds: energy <= bound,
        });
    }
    let mut by_length: Vec<&CounterexampleRow> = rows.iter().collect();
    by_length.sort_by(|a, b| b.length.total_cmp(&a.length));
    let strictly_decreasing = by_length.windows(2).all(|w| w[1].quotient < w[0].quotient);
    Ok(CounterexampleReport { eps, order, cn, rows, strictly_decreasing })
}

/// Exponential fit `osc(t) ≈ G e^{-rate t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub window: (f64, f64),
}

/// Fit over the final half of the snapshots.
pub fn oscillation_decay_rate(traj: &Trajectory) -> Result<DecayFit> {
    let n = traj.snapshots.len();
    if n < 10 {
        return Err(Error::param("trajectory", format!("need at least 10 snapshots, got {n}")));
    }
    fit_decay_window(traj, n / 2, n)
}

/// Fit over snapshots `from..to`.
pub fn fit_decay_window(traj: &Trajectory, from: usize, to: usize) -> Result<DecayFit> {
    let snaps = &traj.snapshots;
    if to > snaps.len() || to < from + 2 {
        return Err(Error::param("window", format!("invalid snapshot window {from}..{to} of {}", snaps.len())));
    }
    let final_osc = snaps[snaps.len() - 1].oscillation();
    if !(final_osc > 1e-12) {
        return Err(Error::NoOscillation(format!("final oscillation {final_osc} is below 1e-12")));
    }
    let pts: Vec<(f64, f64)> = snaps[from..to].iter().map(|s| (s.time, s.oscillation().ln())).collect();
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / m).sqrt();
    Ok(DecayFit { rate: -slope, amplitude: intercept.exp(), residual, window: (pts[0].0, pts[pts.len() - 1].0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::sample_function_to_field;

    #[test]
    fn constant_energy_zero() {
        let spec = FormSpec::interval(0.0, 1.0, 64, 0.25, 2.0).unwrap();
        let u = ScalarField::constant(spec.grid(), 0.7, None);
        assert_eq!(energy_form(&u, &spec).unwrap(), 0.0);
        assert!(matches!(rayleigh_quotient(&u, &spec), Err(Error::InadmissibleTrial(_))));
    }

    #[test]
    fn linear_energy_oracle() {
        let mut errs = Vec::new();
        for cells in [512, 1024] {
            let spec = FormSpec::interval(0.0, 1.0, cells, 0.25, 2.0).unwrap();
            let u = sample_function_to_field(|x| x[0], spec.grid(), None).unwrap();
            errs.push((energy_form(&u, &spec).unwrap() - 8.0 / 15.0).abs());
        }
        assert!(errs[1] < errs[0] && errs[1] < 0.01 * 8.0 / 15.0, "{errs:?}");
    }

    #[test]
    fn thin_rectangle_norm() {
        let spec = FormSpec::rectangle(0.1, 1.0, 16, 64, 0.5, 1.0).unwrap();
        let u = trial_y(&spec).unwrap();
        let norm2 = u.values.iter().map(|v| v * v).sum::<f64>() * spec.grid().cell_volume();
        assert!((norm2 - 2.0 * 0.1 / 3.0).abs() / (0.2 / 3.0) < 1e-3);
        assert!(u.values.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn form_matrix_matches_energy() {
        let spec = FormSpec::rectangle(0.5, 1.0, 6, 10, 0.4, 1.3).unwrap();
        let a = form_matrix(&spec).unwrap();
        let n = spec.grid().len();
        let u = sample_function_to_field(|x| (3.0 * x[0]).sin() + x[1] * x[1], spec.grid(), None).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(a[i * n + j], a[j * n + i]);
            }
        }
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += u.values[i] * a[i * n + j] * u.values[j];
            }
        }
        let e = energy_form(&u, &spec).unwrap();
        assert!((quad - e).abs() <= 1e-10 * e);
    }

    #[test]
    fn dense_and_lanczos_agree() {
        let spec = FormSpec::interval(-1.0, 1.0, 300, 0.5, 1.0).unwrap();
        let n = spec.grid().len();
        let a = form_matrix(&spec).unwrap();
        let vol = spec.grid().cell_volume();
        let b: Vec<f64> = a.iter().map(|x| x / vol).collect();
        let d = dense_eigen(&b, n, 4, vol).unwrap();
        let l = lanczos(&b, n, 4, vol, 7).unwrap();
        for k in 1..4 {
            assert!((d.eigenvalues[k] - l.eigenvalues[k]).abs() < 1e-8 * d.eigenvalues[k], "{:?} {:?}", &d.eigenvalues, &l.eigenvalues);
            let c = vol * dot(&d.eigenvectors[k], &l.eigenvectors[k]);
            assert!((c.abs() - 1.0).abs() < 1e-6);
        }
        assert!(d.eigenvalues[0].abs() <= 1e-8 * d.eigenvalues[1]);
        assert!(l.eigenvalues[0].abs() <= 1e-8 * l.eigenvalues[1]);
    }

    #[test]
    fn expansion_examples() {
        let spec = FormSpec::interval(-1.0, 1.0, 40, 0.5, 1.0).unwrap();
        let rep = lambda2(&spec, 40).unwrap();
        let e = expand_in_eigenbasis(&rep.eigenvectors[3], &rep).unwrap();
        for (i, c) in e.coefficients.iter().enumerate() {
            assert!((c - if i == 3 { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
        let c = expand_in_eigenbasis(&vec![0.3; 40], &rep).unwrap();
        assert!(c.coefficients[1..].iter().all(|x| x.abs() < 1e-10));
        let f: Vec<f64> = spec.grid().points().map(|p| (2.0 * p[0]).exp()).collect();
        let g = expand_in_eigenbasis(&f, &rep).unwrap();
        assert!(g.residual < 1e-8);
        let parseval: f64 = g.coefficients.iter().map(|c| c * c).sum();
        let norm = rep.cell_volume * dot(&f, &f);
        assert!((parseval - norm).abs() < 1e-8 * norm);
    }

    #[test]
    fn scaling_is_exact() {
        let base = lambda2(&FormSpec::interval(-1.0, 1.0, 100, 0.5, 1.0).unwrap(), 2).unwrap().lambda2();
        let big = lambda2(&FormSpec::interval(-2.0, 2.0, 100, 0.5, 1.0).unwrap(), 2).unwrap().lambda2();
        assert!((big - base / 2.0).abs() < 1e-9 * base);
    }
}
