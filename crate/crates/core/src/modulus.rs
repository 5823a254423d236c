//! Moduli of continuity, the auxiliary function `Z_ε`, and preservation checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::discretize::{Grid, ScalarField};
use crate::error::{Error, Result};
use crate::evolve::Trajectory;

/// How a profile came to be; only constructed and evolved profiles satisfy
/// the odd-extension evolution condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    /// `tanh(λ s)` initial profile.
    Tanh { lambda: f64 },
    /// Output of `evolve_phi` started from a profile with the given λ.
    Evolved { lambda: Option<f64> },
    /// Running maximum of binned pair differences.
    Empirical,
    /// User-supplied samples.
    Custom,
}

/// `φ(s)` sampled on a uniform grid `s_k = k·spacing`, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusProfile {
    spacing: f64,
    values: Vec<f64>,
    time: f64,
    beyond: f64,
    provenance: Provenance,
    margin: Option<f64>,
}

impl ModulusProfile {
    /// `tanh(λ s)` on `[0, range]`; `range` must be a whole number of spacings.
    pub fn tanh(lambda: f64, spacing: f64, range: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
        }
        let m = node_count(spacing, range)?;
        let values = (0..=m).map(|k| (lambda * k as f64 * spacing).tanh()).collect();
        Ok(Self { spacing, values, time: 0.0, beyond: 1.0, provenance: Provenance::Tanh { lambda }, margin: None })
    }

    /// Arbitrary samples; beyond the last node the last value is held.
    pub fn from_values(spacing: f64, values: Vec<f64>, time: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::param("spacing", format!("must be positive, got {spacing}")));
        }
        if values.len() < 2 {
            return Err(Error::param("values", "need at least two samples"));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let beyond = values[values.len() - 1];
        Ok(Self { spacing, values, time, beyond, provenance: Provenance::Custom, margin: None })
    }

    pub(crate) fn evolved(&self, values: Vec<f64>, time: f64, beyond: f64) -> Self {
        let lambda = match self.provenance {
            Provenance::Tanh { lambda } => Some(lambda),
            Provenance::Evolved { lambda } => lambda,
            _ => None,
        };
        Self { spacing: self.spacing, values, time, beyond, provenance: Provenance::Evolved { lambda }, margin: None }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Largest resolved argument.
    pub fn range(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.spacing
    }

    /// Value used past the resolved range.
    pub fn beyond(&self) -> f64 {
        self.beyond
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn lambda(&self) -> Option<f64> {
        match self.provenance {
            Provenance::Tanh { lambda } => Some(lambda),
            Provenance::Evolved { lambda } => lambda,
            _ => None,
        }
    }

    /// Majorization slack recorded by `construct_initial_phi`.
    pub fn construction_margin(&self) -> Option<f64> {
        self.margin
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s < 0.0 {
            return -self.eval(-s);
        }
        let mut x = s / self.spacing;
        if (x - x.round()).abs() < 1e-9 {
            x = x.round();
        }
        let last = self.values.len() - 1;
        if x >= last as f64 {
            return if x == last as f64 { self.values[last] } else { self.beyond };
        }
        let k = x.floor() as usize;
        let frac = x - k as f64;
        if frac == 0.0 {
            self.values[k]
        } else {
            self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
        }
    }
}

fn node_count(spacing: f64, range: f64) -> Result<usize> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::param("spacing", format!("must be positive, got {spacing}")));
    }
    let m = (range / spacing).round();
    if !(range > 0.0) || (m * spacing - range).abs() > 1e-9 * range {
        return Err(Error::param("range", format!("{range} is not a positive multiple of {spacing}")));
    }
    if m < 1.0 {
        return Err(Error::param("range", "must cover at least one spacing"));
    }
    Ok(m as usize)
}

/// Default profile range: half the grid diameter plus the kernel reach,
/// rounded up to a whole number of spacings.
pub fn default_phi_range(grid: &Grid, reach: f64, spacing: f64) -> f64 {
    let r = 0.5 * grid.diameter() + reach;
    (r / spacing - 1e-9).ceil() * spacing
}

/// `ω(s) = running max over bins of ½ max |u(y) - u(x)|`, bins of width
/// `bin_width` centred at multiples of it.
pub fn empirical_modulus(u: &ScalarField, bin_width: f64) -> Result<ModulusProfile> {
    let grid = &u.grid;
    if grid.len() < 2 {
        return Err(Error::param("u", "need at least two nodes"));
    }
    if !(bin_width >= 0.5 * grid.h() * (1.0 - 1e-12)) {
        return Err(Error::param("bin_width", format!("must be >= h/2 = {}, got {bin_width}", 0.5 * grid.h())));
    }
    let bins = (0.5 * grid.diameter() / bin_width).round() as usize + 1;
    let n = grid.len();
    let points: Vec<[f64; 2]> = grid.points().collect();
    let raw = (0..n)
        .into_par_iter()
        .fold(
            || vec![0.0f64; bins],
            |mut acc, i| {
                for j in i + 1..n {
                    let s = 0.5 * dist(&points[i], &points[j]);
                    let b = ((s / bin_width).round() as usize).min(bins - 1);
                    acc[b] = acc[b].max(0.5 * (u.values[j] - u.values[i]).abs());
                }
                acc
            },
        )
        .reduce(|| vec![0.0; bins], |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect());
    let mut values = raw;
    for k in 1..values.len() {
        values[k] = values[k].max(values[k - 1]);
    }
    let beyond = values[values.len() - 1];
    Ok(ModulusProfile { spacing: bin_width, values, time: u.time, beyond, provenance: Provenance::Empirical, margin: None })
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Parameters of the doubling search for `φ₀ = tanh(λ s)`.
#[derive(Debug, Clone, Copy)]
pub struct PhiConstruction {
    pub lambda_init: f64,
    pub spacing: f64,
    pub range: f64,
}

/// First `λ ∈ {λ₀, 2λ₀, …, 2²⁰λ₀}` for which the interpolated `tanh(λ s)`
/// profile satisfies `|u(y) - u(x)| ≤ 2φ(|y-x|/2)` at every node pair.
pub fn construct_initial_phi(u0: &ScalarField, setup: &PhiConstruction) -> Result<ModulusProfile> {
    let sup = u0.sup_norm_with_far_field();
    if sup > 1.0 - 1e-6 {
        return Err(Error::NotMajorizable(format!("sup norm {sup} exceeds 1 - 1e-6")));
    }
    if !(setup.lambda_init.is_finite() && setup.lambda_init > 0.0) {
        return Err(Error::param("lambda_init", format!("must be positive, got {}", setup.lambda_init)));
    }
    let mut lambda = setup.lambda_init;
    for _ in 0..=20 {
        let phi = ModulusProfile::tanh(lambda, setup.spacing, setup.range)?;
        let worst = exhaustive_unordered_margin(u0, &phi);
        if worst <= 0.0 {
            return Ok(ModulusProfile { margin: Some(-worst), ..phi });
        }
        lambda *= 2.0;
    }
    Err(Error::NotMajorizable(format!("no lambda up to {} majorizes the data", lambda / 2.0)))
}

fn exhaustive_unordered_margin(u: &ScalarField, phi: &ModulusProfile) -> f64 {
    let table = PhiTable::new(&u.grid, phi);
    let n = u.values.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = f64::NEG_INFINITY;
            for j in i + 1..n {
                best = best.max((u.values[j] - u.values[i]).abs() - table.two_phi(i, j));
            }
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Per-condition admissibility of a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub zero_at_origin: bool,
    pub strictly_increasing: bool,
    pub tail_reaches_one: bool,
    /// Certified from provenance, not re-derived.
    pub evolution_condition: bool,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.zero_at_origin && self.strictly_increasing && self.tail_reaches_one && self.evolution_condition
    }
}

/// Checks `φ(0) = 0`, strict increase, `1 - tail_tol ≤ φ(R) < 1` with every
/// value below 1, and the provenance flag.
pub fn check_admissible(phi: &ModulusProfile, tail_tol: f64) -> AdmissibilityReport {
    let v = phi.values();
    let last = v[v.len() - 1];
    AdmissibilityReport {
        zero_at_origin: v[0] == 0.0,
        strictly_increasing: v.windows(2).all(|w| w[1] > w[0]),
        tail_reaches_one: last >= 1.0 - tail_tol && v.iter().all(|&x| (0.0..1.0).contains(&x)),
        evolution_condition: matches!(phi.provenance, Provenance::Tanh { .. } | Provenance::Evolved { .. }),
    }
}

/// Maximum of a pair functional with its location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScanResult {
    pub value: f64,
    pub pair: (usize, usize),
    pub time: f64,
    pub pairs_scanned: u64,
    pub exhaustive: bool,
}

/// Controls the switch from exhaustive to stratified pair scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    /// Ordered pair count up to which every pair is visited.
    pub pair_limit: u64,
    pub strata: usize,
    pub samples_per_stratum: usize,
    pub seed: u64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self { pair_limit: 10_000_000, strata: 32, samples_per_stratum: 20_000, seed: 0 }
    }
}

/// `2φ(s)` tabulated by index offset.
struct PhiTable {
    n1: usize,
    dim: usize,
    values: Vec<f64>,
    grid: Grid,
}

impl PhiTable {
    fn new(grid: &Grid, phi: &ModulusProfile) -> Self {
        let [n0, n1] = grid.counts();
        let [h0, h1] = grid.spacing();
        let mut values = vec![0.0; n0 * n1];
        for a in 0..n0 {
            for b in 0..n1 {
                let s = if grid.dim() == 1 { 0.5 * a as f64 * h0 } else { 0.5 * (a as f64 * h0).hypot(b as f64 * h1) };
                values[a * n1 + b] = 2.0 * phi.eval(s);
            }
        }
        Self { n1, dim: grid.dim(), values, grid: grid.clone() }
    }

    fn two_phi(&self, i: usize, j: usize) -> f64 {
        if self.dim == 1 {
            return self.values[i.abs_diff(j)];
        }
        let (i0, i1) = self.grid.multi_index(i);
        let (j0, j1) = self.grid.multi_index(j);
        self.values[i0.abs_diff(j0) * self.n1 + i1.abs_diff(j1)]
    }
}

fn better(a: (f64, usize, usize), b: (f64, usize, usize)) -> (f64, usize, usize) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if (a.1, a.2) <= (b.1, b.2) {
                a
            } else {
                b
            }
        }
    }
}

const NONE: (f64, usize, usize) = (f64::NEG_INFINITY, usize::MAX, usize::MAX);

/// Maximizes `f(i, j)` over ordered node pairs (`i == j` allowed when
/// `diagonal`), exhaustively or by coarse-grid plus distance-stratified
/// sampling followed by local refinement.
fn scan_pairs<F>(grid: &Grid, settings: &ScanSettings, diagonal: bool, f: F) -> (f64, (usize, usize), u64, bool)
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let n = grid.len();
    let total = (n as u64) * (n as u64);
    let eval = |i: usize, j: usize| if !diagonal && i == j { f64::NEG_INFINITY } else { f(i, j) };
    if total <= settings.pair_limit {
        let best = (0..n)
            .into_par_iter()
            .map(|i| (0..n).fold(NONE, |b, j| better(b, (eval(i, j), i, j))))
            .reduce(|| NONE, better);
        return (best.0, (best.1, best.2), total, true);
    }

    let [n0, n1] = grid.counts();
    // coarse subgrid: every q-th node along each axis
    let mut q = 1;
    let coarse = loop {
        let nodes: Vec<usize> = (0..n0)
            .step_by(q)
            .flat_map(|a| (0..n1).step_by(q).map(move |b| (a, b)))
            .map(|(a, b)| grid.index(a, b))
            .collect();
        if (nodes.len() as u64).pow(2) <= settings.pair_limit {
            break nodes;
        }
        q += 1;
    };
    let mut scanned = (coarse.len() as u64).pow(2);
    let mut best = coarse
        .par_iter()
        .map(|&i| coarse.iter().fold(NONE, |b, &j| better(b, (eval(i, j), i, j))))
        .reduce(|| NONE, better);

    let d_max = grid.diameter();
    let sampled = (0..settings.strata)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let lo = d_max * k as f64 / settings.strata as f64;
            let hi = d_max * (k + 1) as f64 / settings.strata as f64;
            let mut local = NONE;
            let mut count = 0u64;
            let mut attempts = 0usize;
            while count < settings.samples_per_stratum as u64 && attempts < 20 * settings.samples_per_stratum {
                attempts += 1;
                let i = rng.gen_range(0..n);
                let r = rng.gen_range(lo..hi);
                let p = grid.point(i);
                let target = if grid.dim() == 1 {
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    [p[0] + sign * r, p[1]]
                } else {
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    [p[0] + r * theta.cos(), p[1] + r * theta.sin()]
                };
                let Some(j) = nearest_node(grid, target) else { continue };
                count += 2;
                local = better(local, (eval(i, j), i, j));
                local = better(local, (eval(j, i), j, i));
            }
            (local, count)
        })
        .collect::<Vec<_>>();
    for (cand, count) in sampled {
        best = better(best, cand);
        scanned += count;
    }

    // hill-climb: scan neighbourhoods of the incumbent pair until it stops moving
    let radius = 3isize;
    for _ in 0..200 {
        let (i, j) = (best.1, best.2);
        let ni = neighbourhood(grid, i, radius);
        let nj = neighbourhood(grid, j, radius);
        scanned += (ni.len() * nj.len()) as u64;
        let cand = ni
            .par_iter()
            .map(|&a| nj.iter().fold(NONE, |b, &c| better(b, (eval(a, c), a, c))))
            .reduce(|| NONE, better);
        let next = better(best, cand);
        if (next.1, next.2) == (best.1, best.2) {
            break;
        }
        best = next;
    }
    (best.0, (best.1, best.2), scanned, false)
}

fn nearest_node(grid: &Grid, p: [f64; 2]) -> Option<usize> {
    let [n0, n1] = grid.counts();
    let [h0, h1] = grid.spacing();
    let a = ((p[0] - grid.lower(0)) / h0).round();
    if a < 0.0 || a >= n0 as f64 {
        return None;
    }
    let b = if grid.dim() == 1 { 0.0 } else { ((p[1] - grid.lower(1)) / h1).round() };
    if b < 0.0 || b >= n1 as f64 {
        return None;
    }
    Some(grid.index(a as usize, b as usize))
}

fn neighbourhood(grid: &Grid, i: usize, radius: isize) -> Vec<usize> {
    let [n0, n1] = grid.counts();
    let (i0, i1) = grid.multi_index(i);
    let r1 = if grid.dim() == 1 { 0 } else { radius };
    let mut out = Vec::new();
    for a in -radius..=radius {
        for b in -r1..=r1 {
            let (j0, j1) = (i0 as isize + a, i1 as isize + b);
            if j0 >= 0 && j0 < n0 as isize && j1 >= 0 && j1 < n1 as isize {
                out.push(grid.index(j0 as usize, j1 as usize));
            }
        }
    }
    out
}

/// `max Z_ε = u(y) - u(x) - 2φ(|y-x|/2) - ε e^{ct}(1 + |x|² + |y|²)` over
/// ordered pairs, `x = y` included. The snapshot time is taken from `u`.
pub fn z_epsilon_max(u: &ScalarField, phi: &ModulusProfile, eps: f64, c: f64, settings: &ScanSettings) -> Result<PairScanResult> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::param("c", format!("must be positive, got {c}")));
    }
    let table = PhiTable::new(&u.grid, phi);
    let norm2: Vec<f64> = u.grid.points().map(|p| p[0] * p[0] + p[1] * p[1]).collect();
    let penalty = eps * (c * u.time).exp();
    let v = &u.values;
    let f = |i: usize, j: usize| v[j] - v[i] - table.two_phi(i, j) - penalty * (1.0 + norm2[i] + norm2[j]);
    let (value, pair, pairs_scanned, exhaustive) = scan_pairs(&u.grid, settings, true, f);
    Ok(PairScanResult { value, pair, time: u.time, pairs_scanned, exhaustive })
}

/// `m = max_{x≠y} |u(y) - u(x)| - 2φ(|y-x|/2)`.
pub fn margin(u: &ScalarField, phi: &ModulusProfile, settings: &ScanSettings) -> PairScanResult {
    let table = PhiTable::new(&u.grid, phi);
    let v = &u.values;
    let f = |i: usize, j: usize| (v[j] - v[i]).abs() - table.two_phi(i, j);
    let (value, pair, pairs_scanned, exhaustive) = scan_pairs(&u.grid, settings, false, f);
    PairScanResult { value, pair, time: u.time, pairs_scanned, exhaustive }
}

/// Unordered pair counts with `|x - y| < threshold` and `≥ threshold`.
pub fn count_pair_regimes(grid: &Grid, threshold: f64) -> (u64, u64) {
    let points: Vec<[f64; 2]> = grid.points().collect();
    let n = points.len();
    let near: u64 = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).filter(|&j| dist(&points[i], &points[j]) < threshold).count() as u64)
        .sum();
    let total = (n as u64) * (n as u64 - 1) / 2;
    (near, total - near)
}

#[derive(Debug, Clone)]
pub struct SnapshotVerdict {
    pub time: f64,
    pub margin: PairScanResult,
    /// `(ε, max Z_ε)` per requested ε.
    pub z_max: Vec<(f64, PairScanResult)>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct PreservationReport {
    pub snapshots: Vec<SnapshotVerdict>,
    pub tol: f64,
    pub passed: bool,
    /// Snapshot index and pair of the largest margin.
    pub worst: (usize, (usize, usize)),
}

impl PreservationReport {
    pub fn max_margin(&self) -> f64 {
        self.snapshots.iter().map(|s| s.margin.value).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Checks `m(t) ≤ tol` and `max Z_ε < 0` for every ε at every snapshot.
pub fn verify_preservation(
    traj: &Trajectory,
    phis: &[ModulusProfile],
    eps_list: &[f64],
    c: f64,
    tol: f64,
    settings: &ScanSettings,
) -> Result<PreservationReport> {
    if traj.snapshots.len() != phis.len() {
        return Err(Error::TimeMismatch(format!(
            "{} field snapshots vs {} profiles",
            traj.snapshots.len(),
            phis.len()
        )));
    }
    let mut snapshots = Vec::with_capacity(phis.len());
    for (u, phi) in traj.snapshots.iter().zip(phis) {
        if (u.time - phi.time()).abs() > 1e-12 * u.time.abs().max(1.0) {
            return Err(Error::TimeMismatch(format!("field at t={} paired with profile at t={}", u.time, phi.time())));
        }
        let m = margin(u, phi, settings);
        let mut z_max = Vec::with_capacity(eps_list.len());
        for &eps in eps_list {
            z_max.push((eps, z_epsilon_max(u, phi, eps, c, settings)?));
        }
        let passed = m.value <= tol && z_max.iter().all(|(_, z)| z.value < 0.0);
        snapshots.push(SnapshotVerdict { time: u.time, margin: m, z_max, passed });
    }
    let worst = snapshots
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY, (0, 0)), |acc, (k, s)| {
            if s.margin.value > acc.1 {
                (k, s.margin.value, s.margin.pair)
            } else {
                acc
            }
        });
    let passed = snapshots.iter().all(|s| s.passed);
    Ok(PreservationReport { snapshots, tol, passed, worst: (worst.0, worst.2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::sample_function_to_field;

    fn naive_z(u: &ScalarField, phi: &ModulusProfile, eps: f64, c: f64) -> f64 {
        let pts: Vec<[f64; 2]> = u.grid.points().collect();
        let mut best = f64::NEG_INFINITY;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let s = 0.5 * ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
                let pen = eps * (c * u.time).exp() * (1.0 + pts[i][0].powi(2) + pts[i][1].powi(2) + pts[j][0].powi(2) + pts[j][1].powi(2));
                best = best.max(u.values[j] - u.values[i] - 2.0 * phi.eval(s) - pen);
            }
        }
        best
    }

    #[test]
    fn empirical_examples() {
        let g = Grid::line(-1.0, 1.0, 0.1).unwrap();
        let c = ScalarField::constant(&g, 0.5, None);
        assert!(empirical_modulus(&c, 0.05).unwrap().values().iter().all(|&v| v == 0.0));
        let lin = sample_function_to_field(|x| x[0], &g, None).unwrap();
        let w = empirical_modulus(&lin, 0.05).unwrap();
        for (k, v) in w.values().iter().enumerate() {
            assert!((v - k as f64 * 0.05).abs() < 1e-12);
        }
        let g = Grid::line(-1.05, 1.05, 0.1).unwrap();
        let sign = sample_function_to_field(|x| x[0].signum(), &g, None).unwrap();
        let w = empirical_modulus(&sign, 0.05).unwrap();
        assert!(w.values()[1..].iter().all(|&v| v == 1.0));
        assert!(empirical_modulus(&sign, 0.01).is_err());
    }

    #[test]
    fn construction_examples() {
        let g = Grid::line(-3.0, 3.0, 0.05).unwrap();
        let setup = PhiConstruction { lambda_init: 1.0, spacing: 0.025, range: 3.5 };
        let zero = ScalarField::constant(&g, 0.0, Some((0.0, 0.0)));
        assert_eq!(construct_initial_phi(&zero, &setup).unwrap().lambda(), Some(1.0));
        let u = sample_function_to_field(|x| 0.9 * (3.0 * x[0]).tanh(), &g, Some((-0.9, 0.9))).unwrap();
        let phi = construct_initial_phi(&u, &setup).unwrap();
        assert_eq!(phi.lambda(), Some(4.0));
        assert!(phi.construction_margin().unwrap() >= 0.0);
        assert!(margin(&u, &phi, &ScanSettings::default()).value <= 0.0);
        let one = sample_function_to_field(|x| x[0].tanh() / 3f64.tanh(), &g, Some((-1.0, 1.0))).unwrap();
        assert!(matches!(construct_initial_phi(&one, &setup), Err(Error::NotMajorizable(_))));
    }

    #[test]
    fn admissibility_examples() {
        let t = ModulusProfile::tanh(1.0, 0.01, 10.0).unwrap();
        assert!(check_admissible(&t, 1e-3).passed());
        let lin = ModulusProfile::from_values(0.01, (0..=100).map(|k| k as f64 * 0.01).collect(), 0.0).unwrap();
        let r = check_admissible(&lin, 1e-3);
        assert!(!r.tail_reaches_one && r.strictly_increasing);
        let mut plateau: Vec<f64> = (0..=1000).map(|k| (k as f64 * 0.01).tanh()).collect();
        plateau[10] = plateau[9];
        let p = ModulusProfile::from_values(0.01, plateau, 0.0).unwrap();
        assert!(!check_admissible(&p, 1e-3).strictly_increasing);
    }

    #[test]
    fn z_epsilon_zero_field() {
        let g = Grid::line(-1.0, 1.0, 0.1).unwrap();
        let u = ScalarField::constant(&g, 0.0, None);
        let phi = ModulusProfile::tanh(1.0, 0.05, 1.0).unwrap();
        let r = z_epsilon_max(&u, &phi, 0.1, 1.0, &ScanSettings::default()).unwrap();
        assert!((r.value + 0.1).abs() < 1e-15);
        assert_eq!(r.pair, (10, 10));
    }

    #[test]
    fn z_epsilon_matches_naive_loop() {
        let g = Grid::rect([-1.0, -0.5], [1.0, 0.5], 0.125).unwrap();
        let u = sample_function_to_field(|x| 0.7 * (2.0 * x[0] + x[1]).sin(), &g, None).unwrap();
        let u = ScalarField { time: 0.3, ..u };
        let phi = ModulusProfile::tanh(1.5, 0.0625, 1.5).unwrap();
        let r = z_epsilon_max(&u, &phi, 1e-3, 1.0, &ScanSettings::default()).unwrap();
        assert!(r.exhaustive);
        assert_eq!(r.value, naive_z(&u, &phi, 1e-3, 1.0));
    }

    #[test]
    fn stratified_scan_finds_smooth_maximum() {
        let g = Grid::rect([-2.0, -2.0], [2.0, 2.0], 0.0625).unwrap();
        let u = sample_function_to_field(|x| 0.9 * (3.0 * x[0]).tanh(), &g, None).unwrap();
        let phi = ModulusProfile::tanh(2.0, 0.03125, 3.0).unwrap();
        let exact = z_epsilon_max(&u, &phi, 1e-3, 1.0, &ScanSettings { pair_limit: u64::MAX, ..Default::default() }).unwrap();
        let sampled = z_epsilon_max(&u, &phi, 1e-3, 1.0, &ScanSettings::default()).unwrap();
        assert!(!sampled.exhaustive);
        assert!((sampled.value - exact.value).abs() < 1e-12, "{} vs {}", sampled.value, exact.value);
    }

    #[test]
    fn empirical_profile_gives_zero_max() {
        let g = Grid::line(-1.0, 1.0, 0.05).unwrap();
        let u = sample_function_to_field(|x| (2.0 * x[0]).sin() * 0.8, &g, None).unwrap();
        let w = empirical_modulus(&u, 0.025).unwrap();
        let m = margin(&u, &w, &ScanSettings::default());
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn regime_counts() {
        let g = Grid::line(0.0, 1.0, 0.25).unwrap();
        assert_eq!(count_pair_regimes(&g, 0.5), (4, 6));
    }
}
