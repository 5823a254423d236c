//! Experiment orchestration behind the `nhl` subcommands.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Command, ExperimentConfig};
use crate::coupling::{run_suite, CouplingSuite};
use crate::discretize::{assemble_operator, sample_function_to_field, DiscreteOperator, Grid, OperatorMode, ScalarField};
use crate::error::{Error, Result};
use crate::evolve::{
    auto_dt, evolve_linear, evolve_nonlinear, evolve_phi, stable_dt, EvolutionProblem, NonlinearFamily, NonlinearTerm,
    PhiDomain, PhiEquation, PhiEvolution, Scheme, Trajectory,
};
use crate::io::{self, Report};
use crate::kernels::{marginal_1d, KernelFamily, RadialKernel, RadialProfile};
use crate::modulus::{
    check_admissible, construct_initial_phi, count_pair_regimes, default_phi_range, margin, verify_preservation,
    ModulusProfile, PhiConstruction, ScanSettings,
};
use crate::spectral::{self, counterexample_report, energy_form, rayleigh_quotient, CounterexampleGrids, FormSpec};

/// How a command ended when it did not error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Passed,
    /// The run finished and has no verdict to give.
    Completed,
    Violation,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Passed | Status::Completed => 0,
            Status::Violation => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Status::Passed => "pass",
            Status::Completed => "completed",
            Status::Violation => "violation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub report: Report,
}

/// Appends the resolved configuration as a `[config]` section.
pub fn echo_config(report: &mut Report, cfg: &ExperimentConfig, command: Command) {
    report.section("config");
    for (k, v) in cfg.effective(command) {
        report.line(k, v);
    }
}

/// Runs `command`, writing `report.txt` and any tables into `out`.
pub fn run(command: Command, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    cfg.check_command(command)?;
    io::ensure_dir(out)?;
    let (status, report) = match command {
        Command::Evolve => cmd_evolve(cfg, out)?,
        Command::ModulusVerify => cmd_modulus_verify(cfg, out)?,
        Command::SpectralRayleigh => cmd_rayleigh(cfg)?,
        Command::SpectralLambda2 => cmd_lambda2(cfg, out)?,
        Command::SpectralCounterexample => cmd_counterexample(cfg, out)?,
        Command::CouplingCheck => cmd_coupling(cfg, out)?,
        Command::ProbeRegional2d => cmd_probe(cfg, out)?,
    };
    let mut full = Report::new();
    full.section("run").line("command", command.name()).line("status", status.name());
    full.append(report);
    echo_config(&mut full, cfg, command);
    full.write(&out.join("report.txt"))?;
    Ok(Outcome { status, report: full })
}

/// Writes an `[error]` report with the config echo; failures here are ignored.
pub fn write_error_report(err: &Error, cfg: Option<&ExperimentConfig>, command: Command, out: &Path) -> Report {
    let mut report = Report::new();
    report.section("run").line("command", command.name()).line("status", "error");
    report.section("error").line("message", err);
    if let Some(cfg) = cfg {
        echo_config(&mut report, cfg, command);
    }
    if std::fs::create_dir_all(out).is_ok() {
        let _ = report.write(&out.join("report.txt"));
    }
    report
}

pub fn build_kernel(cfg: &ExperimentConfig) -> Result<RadialKernel> {
    let n = cfg.usize("kernel.n")?;
    let family = KernelFamily::parse(cfg.text("kernel.family")?)
        .ok_or_else(|| Error::Config("kernel.family: expected one of indicator, gaussian, fractional".into()))?;
    let kernel = match family {
        KernelFamily::Indicator => RadialKernel::indicator(n, cfg.f64("kernel.delta")?)?,
        KernelFamily::Gaussian => RadialKernel::gaussian(n, cfg.f64("kernel.sigma")?)?,
        KernelFamily::FractionalTruncated => {
            RadialKernel::fractional(n, cfg.f64("kernel.s")?, cfg.f64_or_auto("kernel.rmin")?, cfg.f64_or_auto("kernel.rmax")?)?
        }
    };
    match cfg.f64_or_auto("kernel.c")? {
        Some(c) => kernel.with_normalization(c),
        None => Ok(kernel),
    }
}

pub fn build_grid(cfg: &ExperimentConfig) -> Result<Grid> {
    let n = cfg.usize("kernel.n")?;
    let (lo, hi, h) = (cfg.f64_list("grid.lower")?, cfg.f64_list("grid.upper")?, cfg.f64("grid.h")?);
    if lo.len() != n || hi.len() != n {
        return Err(Error::Config(format!(
            "grid.lower and grid.upper need {n} entries for kernel.n = {n}, got {} and {}",
            lo.len(),
            hi.len()
        )));
    }
    match n {
        1 => Grid::line(lo[0], hi[0], h),
        _ => Grid::rect([lo[0], lo[1]], [hi[0], hi[1]], h),
    }
}

fn build_mode(cfg: &ExperimentConfig) -> Result<OperatorMode> {
    let m = cfg.text("grid.mode")?;
    OperatorMode::parse(m).ok_or_else(|| Error::Config(format!("grid.mode: unknown mode `{m}`")))
}

pub fn build_initial(cfg: &ExperimentConfig, grid: &Grid, mode: OperatorMode) -> Result<ScalarField> {
    let a = cfg.f64("initial.amplitude")?;
    let rate = cfg.f64("initial.rate")?;
    let full = mode == OperatorMode::FullSpace;
    match cfg.text("initial.kind")? {
        "tanh" => sample_function_to_field(|x| a * (rate * x[0]).tanh(), grid, full.then_some((-a, a))),
        "sin" => {
            let raw = sample_function_to_field(|x| (rate * x[0]).sin(), grid, None)?;
            let sup = raw.sup_norm();
            if sup == 0.0 {
                return Err(Error::Config("initial.kind = sin vanishes on the grid".into()));
            }
            let values = raw.values.iter().map(|v| a * v / sup).collect();
            let far = full.then_some((-a, a));
            ScalarField::new(grid.clone(), values, 0.0, far)
        }
        _ => {
            let path = cfg.text("initial.file")?;
            let field = io::read_snapshot(Path::new(path))?;
            if &field.grid != grid {
                return Err(Error::GridMismatch(format!("{path} does not lie on the configured grid")));
            }
            Ok(field)
        }
    }
}

pub fn build_nonlinear(cfg: &ExperimentConfig) -> Result<Option<NonlinearTerm>> {
    let name = cfg.text("nonlinear.family")?;
    if name == "none" {
        return Ok(None);
    }
    let family = NonlinearFamily::parse(name).ok_or_else(|| Error::Config(format!("nonlinear.family: unknown `{name}`")))?;
    let term = NonlinearTerm::new(
        family,
        cfg.f64("nonlinear.kappa")?,
        cfg.f64("nonlinear.mu")?,
        cfg.f64("nonlinear.wmax")?,
        cfg.f64("nonlinear.c")?,
    )?;
    Ok(Some(term))
}

struct Evolved {
    kernel: RadialKernel,
    grid: Grid,
    mode: OperatorMode,
    nonlinear: Option<NonlinearTerm>,
    traj: Trajectory,
    dt: f64,
    stride: usize,
    t_end: f64,
    scheme: Scheme,
}

fn evolve_from(cfg: &ExperimentConfig) -> Result<(Evolved, DiscreteOperator)> {
    let grid = build_grid(cfg)?;
    let kernel = build_kernel(cfg)?.with_default_inner_cutoff(grid.h());
    let mode = build_mode(cfg)?;
    let op = assemble_operator(&kernel, &grid, mode)?;
    let initial = build_initial(cfg, &grid, mode)?;
    let nonlinear = build_nonlinear(cfg)?;
    let scheme = Scheme::parse(cfg.text("evolve.scheme")?).ok_or_else(|| Error::Config("evolve.scheme".into()))?;
    let (t_end, stride) = (cfg.f64("evolve.t_end")?, cfg.usize("evolve.stride")?);
    let dt = match cfg.f64_or_auto("evolve.dt")? {
        Some(dt) => dt,
        None => {
            let mut limit = stable_dt(&op, 0.5);
            if let Some(q) = &nonlinear {
                limit = limit.min(0.25 / q.c());
            }
            auto_dt(limit, t_end, stride)
        }
    };
    let problem = EvolutionProblem {
        operator: &op,
        initial,
        scheme,
        dt,
        t_end,
        nonlinear: nonlinear.clone(),
        snapshot_stride: stride,
    };
    let traj = if nonlinear.is_some() { evolve_nonlinear(&problem)? } else { evolve_linear(&problem)? };
    Ok((Evolved { kernel, grid, mode, nonlinear, traj, dt, stride, t_end, scheme }, op))
}

fn cmd_evolve(cfg: &ExperimentConfig, out: &Path) -> Result<(Status, Report)> {
    let (ev, op) = evolve_from(cfg)?;
    io::write_trajectory(&ev.traj, &out.join("trajectory"))?;
    let mut r = Report::new();
    r.section("evolution")
        .line("operator", &ev.traj.description)
        .line("mode", ev.mode.name())
        .line("nodes", ev.grid.len())
        .line("scheme", ev.scheme.name())
        .line("dt", ev.dt)
        .line("stable_dt", stable_dt(&op, 0.5))
        .line("t_end", ev.t_end)
        .line("snapshots", ev.traj.snapshots.len());
    for (k, s) in ev.traj.snapshots.iter().enumerate() {
        r.section(format!("snapshot {k}"))
            .line("t", s.time)
            .line("sup_norm", s.sup_norm())
            .line("oscillation", s.oscillation())
            .line("integral", s.integral());
    }
    Ok((Status::Completed, r))
}

fn scan_settings(cfg: &ExperimentConfig) -> Result<ScanSettings> {
    Ok(ScanSettings {
        pair_limit: cfg.u64("modulus.pair_limit")?,
        strata: cfg.usize("modulus.strata")?,
        samples_per_stratum: cfg.usize("modulus.samples")?,
        seed: cfg.seed(),
    })
}

fn phi_equation(cfg: &ExperimentConfig) -> Result<PhiEquation> {
    Ok(match cfg.text("nonlinear.phi_equation")? {
        "literal" => PhiEquation::Literal,
        _ => PhiEquation::Proof,
    })
}

fn initial_phi(cfg: &ExperimentConfig, u0: &ScalarField, spacing: f64, range: f64) -> Result<ModulusProfile> {
    match cfg.f64_or_auto("modulus.lambda")? {
        Some(lambda) => ModulusProfile::tanh(lambda, spacing, range),
        None => construct_initial_phi(u0, &PhiConstruction { lambda_init: cfg.f64("modulus.lambda_init")?, spacing, range }),
    }
}

fn cmd_modulus_verify(cfg: &ExperimentConfig, out: &Path) -> Result<(Status, Report)> {
    let (ev, _) = evolve_from(cfg)?;
    let h = ev.grid.h();
    let u0 = &ev.traj.snapshots[0];
    let sup = u0.sup_norm_with_far_field();
    if sup >= 1.0 {
        return Err(Error::NotMajorizable(format!("initial sup norm {sup} must be < 1")));
    }
    let spacing = cfg.f64_or_auto("modulus.phi_spacing")?.unwrap_or(0.5 * h);
    let reach = ev.kernel.reach().ok_or_else(|| {
        Error::Unsupported("modulus verification needs a kernel with bounded reach (set kernel.rmax)".into())
    })?;
    let range = default_phi_range(&ev.grid, reach, spacing);
    let phi0 = initial_phi(cfg, u0, spacing, range)?;
    let admissible = check_admissible(&phi0, 1e-6);
    let domain = match cfg.text("modulus.phi_domain")? {
        "full_line" => PhiDomain::FullLine,
        "regional" => PhiDomain::Regional,
        _ if ev.mode == OperatorMode::Regional => PhiDomain::Regional,
        _ => PhiDomain::FullLine,
    };
    let marginal = marginal_1d(&ev.kernel, None, 0.25 * h)?;
    let phis = evolve_phi(
        &marginal,
        &phi0,
        &PhiEvolution {
            domain,
            equation: phi_equation(cfg)?,
            scheme: ev.scheme,
            dt: ev.dt,
            t_end: ev.t_end,
            snapshot_stride: ev.stride,
            nonlinear: ev.nonlinear.clone(),
        },
    )?;
    let c = ev.nonlinear.as_ref().map_or(1.0, |q| q.c());
    let tol = cfg.f64_or_auto("modulus.tol")?.unwrap_or(5.0 * h);
    let eps = cfg.f64_list("modulus.eps_list")?;
    let verdict = verify_preservation(&ev.traj, &phis, &eps, c, tol, &scan_settings(cfg)?)?;

    io::write_trajectory(&ev.traj, &out.join("trajectory"))?;
    io::write_text(&out.join("phi.csv"), &phi_table(&phis))?;

    let mut r = Report::new();
    r.section("summary")
        .line("passed", verdict.passed)
        .line("max_margin", verdict.max_margin())
        .line("tol", tol)
        .line("phi_lambda", phi0.lambda().map_or("n/a".to_string(), |l| l.to_string()))
        .line("phi_construction_slack", phi0.construction_margin().map_or("n/a".to_string(), |m| m.to_string()))
        .line("phi_zero_at_origin", admissible.zero_at_origin)
        .line("phi_strictly_increasing", admissible.strictly_increasing)
        .line("phi_tail_reaches_one", admissible.tail_reaches_one)
        .line("phi_domain", domain.name())
        .line("phi_equation", phi_equation(cfg)?.name())
        .line("penalty_rate", c);
    let (k, (i, j)) = verdict.worst;
    let (pi, pj) = (ev.grid.point(i), ev.grid.point(j));
    r.line("worst_time", verdict.snapshots[k].time).line("worst_pair", format!("{} -> {}", fmt_point(&pi, &ev.grid), fmt_point(&pj, &ev.grid)));
    if ev.mode == OperatorMode::Regional {
        let (near, far) = count_pair_regimes(&ev.grid, 2.0 * reach);
        r.line("pairs_closer_than_2_reach", near).line("pairs_at_least_2_reach", far);
    }
    for (k, s) in verdict.snapshots.iter().enumerate() {
        r.section(format!("snapshot {k}"))
            .line("t", s.time)
            .line("margin", s.margin.value)
            .line("margin_pair", format!("{:?}", s.margin.pair))
            .line("exhaustive", s.margin.exhaustive)
            .line("pairs_scanned", s.margin.pairs_scanned);
        for (e, z) in &s.z_max {
            r.line(format!("z_max[eps={e}]"), z.value);
        }
        r.line("passed", s.passed);
    }
    Ok((if verdict.passed { Status::Passed } else { Status::Violation }, r))
}

fn fmt_point(p: &[f64; 2], grid: &Grid) -> String {
    if grid.dim() == 1 {
        format!("{}", p[0])
    } else {
        format!("({}, {})", p[0], p[1])
    }
}

fn phi_table(phis: &[ModulusProfile]) -> String {
    let mut out = String::from("s");
    for p in phis {
        let _ = write!(out, ",t={}", p.time());
    }
    out.push('\n');
    let n = phis.first().map_or(0, ModulusProfile::len);
    let spacing = phis.first().map_or(0.0, ModulusProfile::spacing);
    for k in 0..n {
        let _ = write!(out, "{:.16e}", k as f64 * spacing);
        for p in phis {
            let _ = write!(out, ",{:.16e}", p.values()[k]);
        }
        out.push('\n');
    }
    out
}

fn cmd_probe(cfg: &ExperimentConfig, out: &Path) -> Result<(Status, Report)> {
    if cfg.usize("kernel.n")? != 2 || cfg.text("grid.mode")? != "regional" {
        return Err(Error::Config("probe-regional-2d needs kernel.n = 2 and grid.mode = regional".into()));
    }
    let (ev, _) = evolve_from(cfg)?;
    let h = ev.grid.h();
    let length = ev.grid.upper(0) - ev.grid.lower(0);
    let half_width = 0.5 * (ev.grid.upper(1) - ev.grid.lower(1));
    let spacing = cfg.f64_or_auto("modulus.phi_spacing")?.unwrap_or(0.5 * h);
    let range = (0.5 * length / spacing - 1e-9).ceil() * spacing;
    let u0 = &ev.traj.snapshots[0];
    let phi0 = initial_phi(cfg, u0, spacing, range)?;
    let marginal = marginal_1d(&ev.kernel, Some(half_width), 0.25 * h)?;
    let phis = evolve_phi(
        &marginal,
        &phi0,
        &PhiEvolution {
            domain: PhiDomain::Regional,
            equation: PhiEquation::Proof,
            scheme: ev.scheme,
            dt: ev.dt,
            t_end: ev.t_end,
            snapshot_stride: ev.stride,
            nonlinear: None,
        },
    )?;
    let settings = scan_settings(cfg)?;
    let mut r = Report::new();
    r.section("probe")
        .line("verdict", "none")
        .line("interval", format!("[{}, {}]", -0.5 * length, 0.5 * length))
        .line("slice_half_width", half_width)
        .line("phi_lambda", phi0.lambda().map_or("n/a".to_string(), |l| l.to_string()))
        .line("snapshots", ev.traj.snapshots.len());
    let mut series = String::from("t,margin\n");
    let mut worst = f64::NEG_INFINITY;
    r.section("margin");
    for (u, phi) in ev.traj.snapshots.iter().zip(&phis) {
        let m = margin(u, phi, &settings);
        worst = worst.max(m.value);
        r.line(format!("t={}", u.time), m.value);
        let _ = writeln!(series, "{:.16e},{:.16e}", u.time, m.value);
    }
    r.section("extremes").line("max_margin", worst);
    io::write_text(&out.join("margin.csv"), &series)?;
    io::write_trajectory(&ev.traj, &out.join("trajectory"))?;
    Ok((Status::Completed, r))
}

fn form_spec(cfg: &ExperimentConfig) -> Result<FormSpec> {
    let (s, cn) = (cfg.f64("spectral.s")?, cfg.f64("spectral.cn")?);
    match cfg.text("spectral.domain")? {
        "interval" => FormSpec::interval(cfg.f64("spectral.a")?, cfg.f64("spectral.b")?, cfg.usize("spectral.cells")?, s, cn),
        _ => FormSpec::rectangle(
            cfg.f64("spectral.length")?,
            cfg.f64("spectral.eps")?,
            cfg.usize("spectral.cells_x")?,
            cfg.usize("spectral.cells_y")?,
            s,
            cn,
        ),
    }
}

fn trial(cfg: &ExperimentConfig, spec: &FormSpec) -> Result<ScalarField> {
    let g = spec.grid();
    let (a, b) = (g.lower(0) - 0.5 * g.spacing()[0], g.upper(0) + 0.5 * g.spacing()[0]);
    let u = match cfg.text("spectral.trial")? {
        "x" => {
            let raw = sample_function_to_field(|x| x[0], g, None)?;
            let mean = raw.mean();
            ScalarField::new(g.clone(), raw.values.iter().map(|v| v - mean).collect(), 0.0, None)?
        }
        "y" if g.dim() == 2 => sample_function_to_field(|x| x[1], g, None)?,
        "y" => return Err(Error::Config("spectral.trial = y needs a rectangle".into())),
        _ => sample_function_to_field(|x| (std::f64::consts::PI * (x[0] - a) / (b - a)).cos(), g, None)?,
    };
    Ok(u)
}

fn cmd_rayleigh(cfg: &ExperimentConfig) -> Result<(Status, Report)> {
    let spec = form_spec(cfg)?;
    let u = trial(cfg, &spec)?;
    let energy = energy_form(&u, &spec)?;
    let norm2 = u.values.iter().map(|v| v * v).sum::<f64>() * spec.grid().cell_volume();
    let quotient = rayleigh_quotient(&u, &spec)?;
    let mut r = Report::new();
    r.section("rayleigh")
        .line("nodes", spec.grid().len())
        .line("energy", energy)
        .line("norm2", norm2)
        .line("quotient", quotient);
    Ok((Status::Completed, r))
}

fn cmd_lambda2(cfg: &ExperimentConfig, out: &Path) -> Result<(Status, Report)> {
    let spec = form_spec(cfg)?;
    let k = cfg.usize("spectral.k")?.max(2);
    let rep = spectral::lambda2(&spec, k)?;
    let (l1, l2) = (rep.eigenvalues[0], rep.lambda2());
    let v1 = &rep.eigenvectors[0];
    let mean = v1.iter().sum::<f64>() / v1.len() as f64;
    let spread = v1.iter().fold(0.0f64, |m, v| m.max((v - mean).abs())) / mean.abs().max(f64::MIN_POSITIVE);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let trials = cfg.usize("spectral.trials")?;
    let g = spec.grid();
    let mut violations = 0;
    let mut min_quotient = f64::INFINITY;
    for _ in 0..trials {
        let raw: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = raw.iter().sum::<f64>() / raw.len() as f64;
        let u = ScalarField::new(g.clone(), raw.iter().map(|v| v - m).collect(), 0.0, None)?;
        let q = rayleigh_quotient(&u, &spec)?;
        min_quotient = min_quotient.min(q);
        if l2 > q * (1.0 + 1e-10) {
            violations += 1;
        }
    }
    let zero_ok = l1.abs() <= 1e-8 * l2;
    let constant_ok = spread <= 1e-8;
    let mut csv = String::from("index,eigenvalue\n");
    for (i, v) in rep.eigenvalues.iter().enumerate() {
        let _ = writeln!(csv, "{},{:.16e}", i + 1, v);
    }
    io::write_text(&out.join("eigenvalues.csv"), &csv)?;
    let mut r = Report::new();
    r.section("spectrum")
        .line("nodes", g.len())
        .line("method", rep.method)
        .line("lambda1", l1)
        .line("lambda2", l2)
        .line("lambda1_zero", zero_ok)
        .line("lambda1_constant_eigenvector", constant_ok);
    for (i, v) in rep.eigenvalues.iter().enumerate() {
        r.line(format!("lambda[{}]", i + 1), v);
    }
    r.section("variational")
        .line("trials", trials)
        .line("min_trial_quotient", if trials > 0 { min_quotient.to_string() } else { "n/a".into() })
        .line("violations", violations);
    let ok = zero_ok && constant_ok && violations == 0;
    Ok((if ok { Status::Passed } else { Status::Violation }, r))
}

fn cmd_counterexample(cfg: &ExperimentConfig, out: &Path) -> Result<(Status, Report)> {
    let eps = cfg.f64("spectral.eps")?;
    let lengths = cfg.f64_list("spectral.lengths")?;
    let cells = [cfg.usize("spectral.cells_x")?, cfg.usize("spectral.cells_y")?];
    let lambda_cells = match (cfg.contains("spectral.lambda_cells_x"), cfg.contains("spectral.lambda_cells_y")) {
        (true, true) => Some([cfg.usize("spectral.lambda_cells_x")?, cfg.usize("spectral.lambda_cells_y")?]),
        (false, false) => None,
        _ => return Err(Error::Config("set both spectral.lambda_cells_x and spectral.lambda_cells_y or neither".into())),
    };
    let rep = counterexample_report(eps, &lengths, cfg.f64("spectral.s")?, cfg.f64("spectral.cn")?, CounterexampleGrids { cells, lambda_cells })?;
    io::write_text(&out.join("counterexample.csv"), &io::counterexample_csv(&rep))?;
    let mut r = Report::new();
    r.section("counterexample").line("eps", eps).line("strictly_decreasing", rep.strictly_decreasing);
    if let (Some(first), Some(last)) = (rep.rows.first(), rep.rows.last()) {
        r.line("quotient_ratio_last_first", last.quotient / first.quotient);
    }
    for row in &rep.rows {
        let exact = 2.0 * row.length * eps.powi(3) / 3.0;
        r.section(format!("L={}", row.length))
            .line("energy", row.energy)
            .line("norm2", row.norm2)
            .line("norm2_relative_error", (row.norm2 - exact).abs() / exact)
            .line("quotient", row.quotient)
            .line("bound_4L2eps2", row.bound)
            .line("bound_flag", row.bound_holds);
        if let Some((l2, q)) = row.lambda2 {
            r.line("lambda2", l2).line("lambda2_grid_quotient", q).line("lambda2_below_quotient", l2 <= q * (1.0 + 1e-10));
        }
    }
    Ok((if rep.strictly_decreasing { Status::Passed } else { Status::Violation }, r))
}

fn cmd_coupling(cfg: &ExperimentConfig, out: &Path) -> Result<(Status, Report)> {
    let kernel = build_kernel(cfg)?;
    let suite = CouplingSuite {
        frames: cfg.usize("coupling.frames")?,
        resolution: cfg.usize("coupling.resolution")?,
        seed: cfg.seed(),
        shift: cfg.f64("coupling.shift")?,
    };
    let rows = run_suite(&kernel, &suite)?;
    let mut csv = String::from("identity,residual,threshold,passed\n");
    let mut r = Report::new();
    r.section("identities");
    for row in &rows {
        let _ = writeln!(csv, "{},{:.6e},{:.6e},{}", row.name, row.residual, row.threshold, row.passed);
        r.line(
            row.name,
            format!("{} residual={:.3e} threshold={:.3e}", if row.passed { "pass" } else { "FAIL" }, row.residual, row.threshold),
        );
    }
    io::write_text(&out.join("coupling.csv"), &csv)?;
    let ok = rows.iter().all(|row| row.passed);
    Ok((if ok { Status::Passed } else { Status::Violation }, r))
}
