//! Explicit time stepping for the linear, regional and non-linear equations
//! and for the odd-extended modulus profile.

use crate::discretize::{assemble_profile, DiscreteOperator, Grid, OperatorMode, ScalarField};
use crate::error::{Error, Result};
use crate::kernels::MarginalKernel1D;
use crate::modulus::ModulusProfile;

/// Safety factor used when checking `dt` against the row-mass bound.
pub const DEFAULT_SAFETY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Rk4,
}

impl Scheme {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "euler" => Some(Self::Euler),
            "rk4" => Some(Self::Rk4),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Euler => "euler",
            Self::Rk4 => "rk4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearFamily {
    /// `q(p, w) = κ tanh(p)`
    TanhP,
    /// `q(p, w) = (κ + μ min(w, w_max)) tanh(p)`
    TanhPTimesW,
}

impl NonlinearFamily {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "tanh_p" => Some(Self::TanhP),
            "tanh_p_times_w" => Some(Self::TanhPTimesW),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::TanhP => "tanh_p",
            Self::TanhPTimesW => "tanh_p_times_w",
        }
    }
}

/// Reaction term `q(u, |Du|)`, odd in `u`, concave and non-decreasing for `u ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearTerm {
    family: NonlinearFamily,
    kappa: f64,
    mu: f64,
    w_max: f64,
    c: f64,
}

impl NonlinearTerm {
    /// `κ = 0` is accepted so the linear equation is reachable as a special case.
    pub fn new(family: NonlinearFamily, kappa: f64, mu: f64, w_max: f64, c: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::param("kappa", format!("must be finite and >= 0, got {kappa}")));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::param("mu", format!("must be finite and >= 0, got {mu}")));
        }
        if !(w_max.is_finite() && w_max > 0.0) {
            return Err(Error::param("wmax", format!("must be finite and > 0, got {w_max}")));
        }
        let term = Self { family, kappa, mu, w_max, c };
        if !(c.is_finite() && c > term.slope_bound()) {
            return Err(Error::param("c", format!("must exceed kappa + mu*wmax = {}, got {c}", term.slope_bound())));
        }
        Ok(term)
    }

    pub fn tanh_p(kappa: f64, c: f64) -> Result<Self> {
        Self::new(NonlinearFamily::TanhP, kappa, 0.0, 1.0, c)
    }

    pub fn family(&self) -> NonlinearFamily {
        self.family
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    /// Derivative bound `c` (also the penalty growth rate).
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `sup |∂q/∂p|`.
    pub fn slope_bound(&self) -> f64 {
        match self.family {
            NonlinearFamily::TanhP => self.kappa,
            NonlinearFamily::TanhPTimesW => self.kappa + self.mu * self.w_max,
        }
    }

    fn uses_gradient(&self) -> bool {
        self.family == NonlinearFamily::TanhPTimesW && self.mu != 0.0
    }

    pub fn q(&self, p: f64, w: f64) -> f64 {
        let strength = match self.family {
            NonlinearFamily::TanhP => self.kappa,
            NonlinearFamily::TanhPTimesW => self.kappa + self.mu * w.abs().min(self.w_max),
        };
        strength * p.tanh()
    }

    /// Sampled check of oddness, monotonicity, concavity and the slope bound.
    pub fn check_hypotheses(&self) -> Result<()> {
        let h = 1e-4;
        for iw in 0..=10 {
            let w = iw as f64 * 0.3 * self.w_max;
            if self.q(0.0, w) != 0.0 {
                return Err(Error::param("nonlinear", "q(0, w) must vanish"));
            }
            for ip in 1..=200 {
                let p = ip as f64 * 0.05;
                if self.q(-p, w) != -self.q(p, w) {
                    return Err(Error::param("nonlinear", format!("q not odd at p={p}")));
                }
                let (a, b, c) = (self.q(p - h, w), self.q(p, w), self.q(p + h, w));
                if c < b || a - 2.0 * b + c > 1e-12 {
                    return Err(Error::param("nonlinear", format!("q not concave non-decreasing at p={p}")));
                }
                if ((c - a) / (2.0 * h)).abs() >= self.c {
                    return Err(Error::param("nonlinear", format!("slope exceeds c at p={p}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionProblem<'a> {
    pub operator: &'a DiscreteOperator,
    pub initial: ScalarField,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub nonlinear: Option<NonlinearTerm>,
    pub snapshot_stride: usize,
}

/// Snapshots at a uniform stride, starting with the initial field.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<ScalarField>,
    pub scheme: Scheme,
    pub dt: f64,
    pub description: String,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &ScalarField {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }
}

/// `safety / max_i m_i`.
pub fn stable_dt(op: &DiscreteOperator, safety: f64) -> f64 {
    safety / op.max_row_mass()
}

/// Largest step `≤ limit` that divides `t_end` into a whole number of strides.
pub fn auto_dt(limit: f64, t_end: f64, stride: usize) -> f64 {
    if t_end <= 0.0 {
        return limit;
    }
    let stride = stride.max(1) as f64;
    let blocks = (t_end / (limit * stride)).ceil().max(1.0);
    t_end / (blocks * stride)
}

/// `|Du|` by central differences inside, one-sided differences on the boundary.
pub fn gradient_magnitude(u: &ScalarField) -> ScalarField {
    let mut out = vec![0.0; u.values.len()];
    gradient_into(&u.grid, &u.values, &mut out);
    ScalarField { grid: u.grid.clone(), values: out, time: u.time, far_field: None }
}

fn axis_derivative(values: &[f64], idx: impl Fn(usize) -> usize, k: usize, n: usize, h: f64) -> f64 {
    if k == 0 {
        (values[idx(1)] - values[idx(0)]) / h
    } else if k == n - 1 {
        (values[idx(n - 1)] - values[idx(n - 2)]) / h
    } else {
        (values[idx(k + 1)] - values[idx(k - 1)]) / (2.0 * h)
    }
}

fn gradient_into(grid: &Grid, values: &[f64], out: &mut [f64]) {
    let [n0, n1] = grid.counts();
    let [h0, h1] = grid.spacing();
    for (i, o) in out.iter_mut().enumerate() {
        let (i0, i1) = grid.multi_index(i);
        let d0 = axis_derivative(values, |k| grid.index(k, i1), i0, n0, h0);
        *o = if grid.dim() == 1 {
            d0.abs()
        } else {
            let d1 = axis_derivative(values, |k| grid.index(i0, k), i1, n1, h1);
            d0.hypot(d1)
        };
    }
}

/// Right-hand side `Lu + q(u, |Du|)` with far-field values following
/// `u∞' = q(u∞, 0)`.
struct System<'a> {
    op: &'a DiscreteOperator,
    q: Option<&'a NonlinearTerm>,
    full_space: bool,
}

struct Workspace {
    k: [Vec<f64>; 4],
    kf: [(f64, f64); 4],
    stage: Vec<f64>,
    grad: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; n]), kf: [(0.0, 0.0); 4], stage: vec![0.0; n], grad: vec![0.0; n] }
    }
}

impl System<'_> {
    fn rhs(&self, v: &[f64], far: (f64, f64), out: &mut [f64], grad: &mut [f64]) -> (f64, f64) {
        self.op.apply_into(v, far, out);
        let Some(q) = self.q else { return (0.0, 0.0) };
        if q.uses_gradient() {
            gradient_into(self.op.grid(), v, grad);
        }
        for (i, o) in out.iter_mut().enumerate() {
            let w = if q.uses_gradient() { grad[i] } else { 0.0 };
            let r = q.q(v[i], w);
            // skipping exact zeros keeps q ≡ 0 bitwise identical to the linear update
            if r != 0.0 {
                *o += r;
            }
        }
        if self.full_space {
            (q.q(far.0, 0.0), q.q(far.1, 0.0))
        } else {
            (0.0, 0.0)
        }
    }

    fn step(&self, scheme: Scheme, dt: f64, v: &mut [f64], far: &mut (f64, f64), ws: &mut Workspace) {
        let Workspace { k, kf, stage, grad } = ws;
        match scheme {
            Scheme::Euler => {
                let df = self.rhs(v, *far, &mut k[0], grad);
                for (x, d) in v.iter_mut().zip(&k[0]) {
                    *x += dt * d;
                }
                advance_far(far, dt, df);
            }
            Scheme::Rk4 => {
                let half = 0.5 * dt;
                kf[0] = self.rhs(v, *far, &mut k[0], grad);
                for stage_idx in 1..4 {
                    let step = if stage_idx == 3 { dt } else { half };
                    let (prev, rest) = k.split_at_mut(stage_idx);
                    for ((s, x), d) in stage.iter_mut().zip(v.iter()).zip(&prev[stage_idx - 1]) {
                        *s = x + step * d;
                    }
                    let mut f = *far;
                    advance_far(&mut f, step, kf[stage_idx - 1]);
                    kf[stage_idx] = self.rhs(stage, f, &mut rest[0], grad);
                }
                let sixth = dt / 6.0;
                for (i, x) in v.iter_mut().enumerate() {
                    *x += sixth * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                }
                let combine = |a: f64, b: f64, c: f64, d: f64| a + 2.0 * b + 2.0 * c + d;
                let df = (
                    combine(kf[0].0, kf[1].0, kf[2].0, kf[3].0),
                    combine(kf[0].1, kf[1].1, kf[2].1, kf[3].1),
                );
                advance_far(far, sixth, df);
            }
        }
    }
}

fn advance_far(far: &mut (f64, f64), dt: f64, rate: (f64, f64)) {
    if rate.0 != 0.0 {
        far.0 += dt * rate.0;
    }
    if rate.1 != 0.0 {
        far.1 += dt * rate.1;
    }
}

fn step_count(dt: f64, t_end: f64, stride: usize) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::param("t_end", format!("must be >= 0, got {t_end}")));
    }
    if stride == 0 {
        return Err(Error::param("stride", "must be >= 1"));
    }
    let steps = (t_end / dt).round();
    if (steps * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::param("dt", format!("t_end={t_end} is not a whole number of steps of {dt}")));
    }
    let steps = steps as usize;
    if steps % stride != 0 {
        return Err(Error::param("stride", format!("{steps} steps are not a multiple of stride {stride}")));
    }
    Ok(steps)
}

fn check_dt(op: &DiscreteOperator, dt: f64) -> Result<()> {
    let limit = stable_dt(op, DEFAULT_SAFETY);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, limit, reason: "row-mass stability bound" });
    }
    Ok(())
}

fn sup_with_far(values: &[f64], far: Option<(f64, f64)>) -> f64 {
    let m = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    far.map_or(m, |(a, b)| m.max(a.abs()).max(b.abs()))
}

/// Explicit integration of `u_t = Lu`; far-field values stay fixed.
pub fn evolve_linear(problem: &EvolutionProblem) -> Result<Trajectory> {
    if problem.nonlinear.is_some() {
        return Err(Error::param("nonlinear", "evolve_linear takes no reaction term"));
    }
    integrate(problem, None)
}

/// Explicit integration of `u_t = Lu + q(u, |Du|)`.
pub fn evolve_nonlinear(problem: &EvolutionProblem) -> Result<Trajectory> {
    let Some(q) = problem.nonlinear.as_ref() else {
        return Err(Error::param("nonlinear", "evolve_nonlinear needs a reaction term"));
    };
    if problem.dt * q.c() > 0.25 {
        return Err(Error::StepTooLarge { dt: problem.dt, limit: 0.25 / q.c(), reason: "dt*c <= 0.25" });
    }
    integrate(problem, Some(q))
}

fn integrate(problem: &EvolutionProblem, q: Option<&NonlinearTerm>) -> Result<Trajectory> {
    let op = problem.operator;
    op.grid().check_same(&problem.initial.grid)?;
    let steps = step_count(problem.dt, problem.t_end, problem.snapshot_stride)?;
    check_dt(op, problem.dt)?;
    let full_space = op.mode() == OperatorMode::FullSpace;
    let mut far = op.far_field_for(problem.initial.far_field)?;
    let far_out = |f: (f64, f64)| if full_space { Some(f) } else { problem.initial.far_field };

    let m0 = sup_with_far(&problem.initial.values, problem.initial.far_field);
    let growth = q.map_or(0.0, |q| q.slope_bound());
    let c = q.map_or(1.0, |q| q.c());
    // sinh(M) e^{bt} solves M' = b tanh(M), the sup-norm envelope under |q| ≤ b tanh|u|
    let bound = |t: f64| {
        let m = if growth == 0.0 { m0 } else { (m0.sinh() * (growth * t).exp()).asinh() };
        let slack = if q.is_some() { c * t * 1e-3 } else { 0.0 };
        m.max(1.0) * (1.0 + 1e-6) + slack
    };

    let sys = System { op, q, full_space };
    let mut v = problem.initial.values.clone();
    let mut ws = Workspace::new(v.len());
    let mut snapshots = vec![ScalarField { time: 0.0, ..problem.initial.clone() }];
    for k in 1..=steps {
        sys.step(problem.scheme, problem.dt, &mut v, &mut far, &mut ws);
        let t = k as f64 * problem.dt;
        if let Some(idx) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index: idx });
        }
        let norm = sup_with_far(&v, far_out(far));
        if norm > bound(t) {
            return Err(Error::Unstable { time: t, norm, bound: bound(t) });
        }
        if k % problem.snapshot_stride == 0 {
            snapshots.push(ScalarField { grid: op.grid().clone(), values: v.clone(), time: t, far_field: far_out(far) });
        }
    }
    let description = format!(
        "{} {} operator on {} nodes, {} term",
        problem.scheme.name(),
        op.mode().name(),
        op.grid().len(),
        q.map_or("linear".to_string(), |q| q.family().name().to_string())
    );
    Ok(Trajectory { snapshots, scheme: problem.scheme, dt: problem.dt, description })
}

/// Where the odd extension of the profile lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiDomain {
    /// The whole line, far field `±1` beyond the resolved range.
    FullLine,
    /// The interval `[-R, R]` with the regional (truncated) operator.
    Regional,
}

impl PhiDomain {
    pub fn name(self) -> &'static str {
        match self {
            Self::FullLine => "full_line",
            Self::Regional => "regional",
        }
    }
}

/// Which profile equation drives a non-linear run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiEquation {
    /// `φ_t = L̃φ + q(φ, φ')`, far field following `F' = q(F, 0)`.
    Proof,
    /// `φ_t = L̃φ` regardless of the reaction term.
    Literal,
}

impl PhiEquation {
    pub fn name(self) -> &'static str {
        match self {
            Self::Proof => "proof",
            Self::Literal => "literal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhiEvolution {
    pub domain: PhiDomain,
    pub equation: PhiEquation,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub nonlinear: Option<NonlinearTerm>,
}

/// Evolves the odd extension of `phi0` under the marginal kernel, returning the
/// `r ≥ 0` restriction at every stride.
pub fn evolve_phi(kernel: &MarginalKernel1D, phi0: &ModulusProfile, opts: &PhiEvolution) -> Result<Vec<ModulusProfile>> {
    let steps = step_count(opts.dt, opts.t_end, opts.snapshot_stride)?;
    let m = phi0.len() - 1;
    let hs = phi0.spacing();
    let reach = m as f64 * hs;
    let grid = Grid::line(-reach, reach, hs)?;
    let mode = match opts.domain {
        PhiDomain::FullLine => OperatorMode::FullSpace,
        PhiDomain::Regional => OperatorMode::Regional,
    };
    let op = assemble_profile(kernel, &grid, mode)?;
    check_dt(&op, opts.dt)?;
    let q = match opts.equation {
        PhiEquation::Proof => opts.nonlinear.as_ref(),
        PhiEquation::Literal => None,
    };
    if let Some(q) = q {
        if opts.dt * q.c() > 0.25 {
            return Err(Error::StepTooLarge { dt: opts.dt, limit: 0.25 / q.c(), reason: "dt*c <= 0.25" });
        }
    }
    let sys = System { op: &op, q, full_space: mode == OperatorMode::FullSpace };

    let mut v = vec![0.0; 2 * m + 1];
    for k in 0..=m {
        v[m + k] = phi0.values()[k];
        v[m - k] = -phi0.values()[k];
    }
    v[m] = 0.0;
    let f0 = phi0.beyond();
    let mut far = (-f0, f0);
    let mut ws = Workspace::new(v.len());
    let mut out = vec![phi0.clone()];
    for step in 1..=steps {
        sys.step(opts.scheme, opts.dt, &mut v, &mut far, &mut ws);
        for k in 1..=m {
            let a = 0.5 * (v[m + k] - v[m - k]);
            v[m + k] = a;
            v[m - k] = -a;
        }
        v[m] = 0.0;
        far = (-0.5 * (far.1 - far.0), 0.5 * (far.1 - far.0));
        let t = step as f64 * opts.dt;
        if let Some((index, min_diff)) =
            v[m..].windows(2).map(|w| w[1] - w[0]).enumerate().find(|&(_, d)| !(d >= -1e-8))
        {
            return Err(Error::ProfileDegenerated { time: t, min_diff, index });
        }
        if step % opts.snapshot_stride == 0 {
            let beyond = match opts.domain {
                PhiDomain::FullLine => far.1,
                PhiDomain::Regional => v[2 * m],
            };
            out.push(phi0.evolved(v[m..].to_vec(), t, beyond));
        }
    }
    Ok(out)
}
