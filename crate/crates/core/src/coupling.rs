//! Reflection coupling: the mirror map across the bisector of `xy`, the
//! `S/L/R` partition and the integral identities built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::RadialKernel;

type Vector = [f64; 2];

/// Points `x ≠ y` with `e₁ = (y - x)/|y - x|` and `s = |x - y|/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingFrame {
    dim: usize,
    x: Vector,
    y: Vector,
    e1: Vector,
    half_gap: f64,
}

fn pad(v: &[f64]) -> Result<Vector> {
    match v.len() {
        1 => Ok([v[0], 0.0]),
        2 => Ok([v[0], v[1]]),
        d => Err(Error::DimensionMismatch { expected: 2, actual: d }),
    }
}

fn sub(a: Vector, b: Vector) -> Vector {
    [a[0] - b[0], a[1] - b[1]]
}

fn add(a: Vector, b: Vector) -> Vector {
    [a[0] + b[0], a[1] + b[1]]
}

fn dot(a: Vector, b: Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Vector) -> f64 {
    a[0].hypot(a[1])
}

impl CouplingFrame {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
        }
        let (px, py) = (pad(x)?, pad(y)?);
        let d = sub(py, px);
        let len = norm(d);
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::param("frame", "x and y must be distinct finite points"));
        }
        Ok(Self { dim: x.len(), x: px, y: py, e1: [d[0] / len, d[1] / len], half_gap: 0.5 * len })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self) -> &[f64] {
        &self.x[..self.dim]
    }

    pub fn y(&self) -> &[f64] {
        &self.y[..self.dim]
    }

    pub fn e1(&self) -> &[f64] {
        &self.e1[..self.dim]
    }

    /// `s = |x - y| / 2`.
    pub fn half_gap(&self) -> f64 {
        self.half_gap
    }

    fn reflect_v(&self, r: Vector) -> Vector {
        let c = 2.0 * dot(r, self.e1);
        [r[0] - c * self.e1[0], r[1] - c * self.e1[1]]
    }

    fn conjugate_v(&self, r: Vector) -> Vector {
        self.reflect_v(sub(r, sub(self.y, self.x)))
    }

    fn out(&self, v: Vector) -> Vec<f64> {
        v[..self.dim].to_vec()
    }
}

/// `Rr = r - 2⟨r, e₁⟩e₁`.
pub fn reflect(r: &[f64], frame: &CouplingFrame) -> Result<Vec<f64>> {
    check_len(r, frame)?;
    Ok(frame.out(frame.reflect_v(pad(r)?)))
}

/// `r' = R(r - (y - x))`, the solution of `x + r = y + Rr'` and `y + Rr = x + r'`.
pub fn conjugate_vector(r: &[f64], frame: &CouplingFrame) -> Result<Vec<f64>> {
    check_len(r, frame)?;
    let rv = pad(r)?;
    let rp = frame.conjugate_v(rv);
    debug_assert!(pairing_residual_v(rv, rp, frame) <= 1e-12 * (1.0 + norm(rv) + 2.0 * frame.half_gap));
    Ok(frame.out(rp))
}

fn check_len(r: &[f64], frame: &CouplingFrame) -> Result<()> {
    if r.len() != frame.dim {
        return Err(Error::DimensionMismatch { expected: frame.dim, actual: r.len() });
    }
    Ok(())
}

fn pairing_residual_v(r: Vector, rp: Vector, f: &CouplingFrame) -> f64 {
    let a = norm(sub(add(f.x, r), add(f.y, f.reflect_v(rp))));
    let b = norm(sub(add(f.y, f.reflect_v(r)), add(f.x, rp)));
    let c = (dot(rp, f.e1) - (2.0 * f.half_gap - dot(r, f.e1))).abs();
    a.max(b).max(c)
}

/// Largest violation of the two pairing equations and of `r'₁ = |y - x| - r₁`.
pub fn pairing_residual(r: &[f64], frame: &CouplingFrame) -> Result<f64> {
    check_len(r, frame)?;
    let rv = pad(r)?;
    Ok(pairing_residual_v(rv, frame.conjugate_v(rv), frame))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// `⟨r, e₁⟩ = s`
    S,
    /// `⟨r, e₁⟩ < s`
    L,
    /// `⟨r, e₁⟩ > s`
    R,
}

/// Classifies `r` by `r₁ = ⟨r, e₁⟩` against `s`, with tolerance `1e-12·|x - y|` for `S`.
pub fn partition(r: &[f64], frame: &CouplingFrame) -> Result<Label> {
    check_len(r, frame)?;
    let r1 = dot(pad(r)?, frame.e1);
    let tol = 1e-12 * 2.0 * frame.half_gap;
    Ok(if (r1 - frame.half_gap).abs() <= tol {
        Label::S
    } else if r1 < frame.half_gap {
        Label::L
    } else {
        Label::R
    })
}

/// Integration kernel for the invariance checks.
pub trait Density: Sync {
    fn dim(&self) -> usize;
    fn density(&self, r: &[f64]) -> f64;
    /// Half-width of a box containing the support.
    fn extent(&self) -> f64;
}

impl Density for RadialKernel {
    fn dim(&self) -> usize {
        RadialKernel::dim(self)
    }

    fn density(&self, r: &[f64]) -> f64 {
        self.eval(r)
    }

    fn extent(&self) -> f64 {
        crate::kernels::RadialProfile::reach(self).unwrap_or(1.0)
    }
}

/// `ρ(· - shift)`: a kernel that is no longer symmetric under reflection.
#[derive(Debug, Clone)]
pub struct ShiftedKernel {
    pub kernel: RadialKernel,
    pub shift: f64,
}

impl Density for ShiftedKernel {
    fn dim(&self) -> usize {
        self.kernel.dim()
    }

    fn density(&self, r: &[f64]) -> f64 {
        let mut z = r.to_vec();
        z[0] -= self.shift;
        self.kernel.eval(&z)
    }

    fn extent(&self) -> f64 {
        Density::extent(&self.kernel) + self.shift.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceResidual {
    /// `|∫ρ(r)u(y + r)dr - ∫ρ(r)u(y + Rr)dr|` on shared midpoint nodes.
    pub integral: f64,
    /// `max |ρ(r) - ρ(Rr)|` over the nodes.
    pub kernel: f64,
}

/// Tensor midpoint rule with `resolution` cells per axis over the kernel's box.
pub fn reflection_invariance_residual<D, U>(density: &D, u: &U, frame: &CouplingFrame, resolution: usize) -> Result<InvarianceResidual>
where
    D: Density + ?Sized,
    U: Fn(&[f64]) -> f64,
{
    if density.dim() != frame.dim {
        return Err(Error::DimensionMismatch { expected: frame.dim, actual: density.dim() });
    }
    if resolution == 0 {
        return Err(Error::param("resolution", "must be >= 1"));
    }
    let a = density.extent();
    let h = 2.0 * a / resolution as f64;
    let weight = h.powi(frame.dim as i32);
    let cols = if frame.dim == 1 { 1 } else { resolution };
    let (mut lhs, mut rhs, mut kernel) = (0.0, 0.0, 0.0f64);
    for i in 0..resolution {
        for j in 0..cols {
            let r: Vector = [-a + (i as f64 + 0.5) * h, if frame.dim == 1 { 0.0 } else { -a + (j as f64 + 0.5) * h }];
            let rr = frame.reflect_v(r);
            let rho = density.density(&r[..frame.dim]);
            kernel = kernel.max((rho - density.density(&rr[..frame.dim])).abs());
            if rho != 0.0 {
                lhs += rho * u(&add(frame.y, r)[..frame.dim]);
                rhs += rho * u(&add(frame.y, rr)[..frame.dim]);
            }
        }
    }
    Ok(InvarianceResidual { integral: ((lhs - rhs) * weight).abs(), kernel })
}

/// `|∫_S ρ(r)(u(y + Rr) - u(x + r)) dr|` along the hyperplane `r₁ = s`
/// (a single point in 1D), midpoint rule with `resolution` cells.
pub fn s_set_integral<D, U>(density: &D, u: &U, frame: &CouplingFrame, resolution: usize) -> f64
where
    D: Density + ?Sized,
    U: Fn(&[f64]) -> f64,
{
    let s = frame.half_gap;
    let e1 = frame.e1;
    let perp = [-e1[1], e1[0]];
    let integrand = |t: f64| {
        let r = [s * e1[0] + t * perp[0], s * e1[1] + t * perp[1]];
        let rr = frame.reflect_v(r);
        density.density(&r[..frame.dim]) * (u(&add(frame.y, rr)[..frame.dim]) - u(&add(frame.x, r)[..frame.dim]))
    };
    if frame.dim == 1 {
        return integrand(0.0).abs();
    }
    let a = density.extent();
    let h = 2.0 * a / resolution.max(1) as f64;
    (0..resolution.max(1)).map(|k| integrand(-a + (k as f64 + 0.5) * h) * h).sum::<f64>().abs()
}

/// `min ρ(r) - ρ(g(r))` over `samples` random `r ∈ L` within the kernel box,
/// with `g(r) = y - x + Rr`; also returns the count of negative differences.
pub fn weight_inequality<D: Density + ?Sized>(density: &D, frame: &CouplingFrame, samples: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = density.extent();
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    let mut taken = 0;
    while taken < samples {
        let r: Vector = [rng.gen_range(-a..a), if frame.dim == 1 { 0.0 } else { rng.gen_range(-a..a) }];
        if dot(r, frame.e1) >= frame.half_gap * (1.0 - 1e-12) {
            continue;
        }
        taken += 1;
        let g = frame.conjugate_v(r);
        let diff = density.density(&r[..frame.dim]) - density.density(&g[..frame.dim]);
        worst = worst.min(diff);
        if diff < 0.0 {
            violations += 1;
        }
    }
    (worst, violations)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorCase {
    /// `|x - y| < 2δ`
    Overlap,
    /// `|x - y| ≥ 2δ`
    NonOverlap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorCaseReport {
    pub case: IndicatorCase,
    /// `L₁ = [y - x - δ, (y - x)/2]`
    pub l1: (f64, f64),
    /// `L₂ = [-δ, (y - x)/2]`
    pub l2: (f64, f64),
    pub l1_subset_l2: bool,
    /// `χ_{L₂} - χ_{L₁} ≥ 0` on a sampling of `L₂`.
    pub indicator_difference_nonnegative: bool,
    /// `|L₂ \ L₁|`, equal to `y - x` in the overlap case.
    pub difference_measure: f64,
    /// Midpoint of the pair after translating by `m = (x + y)/2`.
    pub translated_midpoint: f64,
}

pub fn indicator_case_check(x: f64, y: f64, delta: f64) -> Result<IndicatorCaseReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param("delta", format!("must be positive, got {delta}")));
    }
    if !(y > x) {
        return Err(Error::param("y", format!("need y > x, got x={x}, y={y}")));
    }
    let gap = y - x;
    let case = if gap >= 2.0 * delta { IndicatorCase::NonOverlap } else { IndicatorCase::Overlap };
    let l1 = (gap - delta, 0.5 * gap);
    let l2 = (-delta, 0.5 * gap);
    let l1_subset_l2 = l1.0 >= l2.0 && l1.1 <= l2.1;
    let inside = |p: f64, set: (f64, f64)| (set.0..=set.1).contains(&p);
    let indicator_difference_nonnegative = (0..=1000).all(|k| {
        let p = l2.0 - 0.1 + (l2.1 - l2.0 + 0.2) * k as f64 / 1000.0;
        (inside(p, l2) as i32) - (inside(p, l1) as i32) >= 0
    });
    let l1_len = (l1.1 - l1.0).max(0.0);
    let difference_measure = (l2.1 - l2.0) - l1_len;
    let m = 0.5 * (x + y);
    let translated_midpoint = 0.5 * ((x - m) + (y - m));
    Ok(IndicatorCaseReport {
        case,
        l1,
        l2,
        l1_subset_l2,
        indicator_difference_nonnegative,
        difference_measure,
        translated_midpoint,
    })
}

/// One line of the coupling table.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct CouplingSuite {
    pub frames: usize,
    pub resolution: usize,
    pub seed: u64,
    /// Shift applied to the kernel in the invariance checks (0 for none).
    pub shift: f64,
}

/// Smooth bump used as the test function.
pub fn test_bump(z: &[f64]) -> f64 {
    let c = [0.3, -0.2];
    let d2: f64 = z.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2).exp()
}

fn check(name: &'static str, residual: f64, threshold: f64) -> IdentityCheck {
    IdentityCheck { name, residual, threshold, passed: residual <= threshold }
}

/// Runs every identity over random frames in `[-1, 1]ⁿ`.
///
/// The invariance integral passes when its residual is below `1e-8` or, for
/// kernels with jumps, when doubling the resolution shrinks it by at least a
/// third (a consistent quadrature rather than a real asymmetry).
pub fn run_suite(kernel: &RadialKernel, suite: &CouplingSuite) -> Result<Vec<IdentityCheck>> {
    let dim = kernel.dim();
    let shifted = ShiftedKernel { kernel: kernel.clone(), shift: suite.shift };
    let density: &dyn Density = if suite.shift != 0.0 { &shifted } else { kernel };
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
    let point = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect() };

    let (mut refl, mut invol, mut pairing, mut swap) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    let (mut integral_fine, mut integral_coarse, mut kernel_sym, mut s_set) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut weight_violations = 0usize;
    for f in 0..suite.frames {
        let (x, y) = (point(&mut rng), point(&mut rng));
        let Ok(frame) = CouplingFrame::new(&x, &y) else { continue };
        for _ in 0..50 {
            let r: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let rr = reflect(&reflect(&r, &frame)?, &frame)?;
            refl = refl.max(r.iter().zip(&rr).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            let cc = conjugate_vector(&conjugate_vector(&r, &frame)?, &frame)?;
            invol = invol.max(r.iter().zip(&cc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            pairing = pairing.max(pairing_residual(&r, &frame)?);
            let label = partition(&r, &frame)?;
            let partner = partition(&conjugate_vector(&r, &frame)?, &frame)?;
            let ok = matches!((label, partner), (Label::L, Label::R) | (Label::R, Label::L) | (Label::S, Label::S));
            if !ok {
                swap += 1;
            }
        }
        let fine = reflection_invariance_residual(density, &test_bump, &frame, 2 * suite.resolution)?;
        let coarse = reflection_invariance_residual(density, &test_bump, &frame, suite.resolution)?;
        integral_fine = integral_fine.max(fine.integral);
        integral_coarse = integral_coarse.max(coarse.integral);
        kernel_sym = kernel_sym.max(fine.kernel);
        s_set = s_set.max(s_set_integral(density, &test_bump, &frame, suite.resolution));
        weight_violations += weight_inequality(density, &frame, 200, suite.seed.wrapping_add(f as u64)).1;
    }

    let integral_threshold = if integral_fine <= 1e-8 { 1e-8 } else { (2.0 / 3.0) * integral_coarse };
    let case_a = indicator_case_check(0.0, 0.5, 1.0)?;
    let case_b = indicator_case_check(0.0, 3.0, 1.0)?;
    let case_c = indicator_case_check(0.0, 2.0, 1.0)?;
    let case_ok = case_a.case == IndicatorCase::Overlap
        && case_a.l1_subset_l2
        && case_a.indicator_difference_nonnegative
        && (case_a.difference_measure - 0.5).abs() < 1e-15
        && case_b.case == IndicatorCase::NonOverlap
        && case_c.case == IndicatorCase::NonOverlap
        && case_a.translated_midpoint == 0.0;
    Ok(vec![
        check("reflection_involution", refl, 1e-14),
        check("conjugate_involution", invol, 1e-12),
        check("pairing_equations", pairing, 1e-12),
        check("partition_swap_violations", swap as f64, 0.0),
        check("kernel_reflection_symmetry", kernel_sym, 1e-14 * Density::density(kernel, &vec![0.0; dim]).max(1.0)),
        check("invariance_integral", integral_fine, integral_threshold),
        check("s_set_integral", s_set, 1e-12),
        check("weight_inequality_violations", weight_violations as f64, 0.0),
        check("indicator_case_split", if case_ok { 0.0 } else { 1.0 }, 0.0),
    ])
}
