//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use nhl_core::app::{self, Status};
use nhl_core::config::{parse_config, Command, ExperimentConfig};
use nhl_core::discretize::{assemble_operator, sample_function_to_field, Grid, OperatorMode, ScalarField};
use nhl_core::evolve::{evolve_linear, EvolutionProblem, Scheme};
use nhl_core::io::Report;
use nhl_core::kernels::RadialKernel;
use nhl_core::spectral::{energy_form, fit_decay_window, generator_spectrum, lambda2, oscillation_decay_rate, FormSpec};

const MARGIN_FACTOR: f64 = 5.0;
const EPS_LIST: [f64; 2] = [1e-3, 1e-2];
const REQUIRED_TIMES: [f64; 4] = [0.0, 0.5, 1.0, 2.0];
const HALVING_RATIO: (f64, f64) = (0.35, 0.65);
const C1_RUNTIME: Duration = Duration::from_secs(60);
const C2_RUNTIME: Duration = Duration::from_secs(300);
const C5_RUNTIME: Duration = Duration::from_secs(120);
const C5_RATIO: f64 = 0.5;
const C5_NORM_TOL: f64 = 0.005;
const C6_ZERO_TOL: f64 = 1e-8;
const C6_SCALING_TOL: f64 = 0.02;
const C7_EXACT: f64 = 8.0 / 15.0;
const C7_TOL: f64 = 0.01;
const C8_TOL: f64 = 0.02;

type Check = Result<(bool, String), String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str, overrides: &[(&str, &str)]) -> Result<ExperimentConfig, String> {
    let mut cfg = parse_config(&configs().join(name)).map_err(|e| e.to_string())?;
    for (k, v) in overrides {
        cfg.set(k, v).map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn run(command: Command, cfg: &ExperimentConfig, out: &Path) -> Result<(Status, Report), String> {
    app::run(command, cfg, out).map(|o| (o.status, o.report)).map_err(|e| e.to_string())
}

fn num(report: &Report, section: &str, key: &str) -> Result<f64, String> {
    report
        .get(section, key)
        .ok_or_else(|| format!("report lacks {section}/{key}"))?
        .parse::<f64>()
        .map_err(|e| format!("{section}/{key}: {e}"))
}

fn text<'a>(report: &'a Report, section: &str, key: &str) -> Result<&'a str, String> {
    report.get(section, key).ok_or_else(|| format!("report lacks {section}/{key}"))
}

struct Snapshot {
    time: f64,
    margin: f64,
    z: Vec<f64>,
    exhaustive: bool,
}

fn snapshots(report: &Report) -> Result<Vec<Snapshot>, String> {
    let mut out = Vec::new();
    for k in 0.. {
        let sec = format!("snapshot {k}");
        if report.get(&sec, "t").is_none() {
            break;
        }
        let z = EPS_LIST.iter().map(|e| num(report, &sec, &format!("z_max[eps={e}]"))).collect::<Result<_, _>>()?;
        out.push(Snapshot {
            time: num(report, &sec, "t")?,
            margin: num(report, &sec, "margin")?,
            z,
            exhaustive: text(report, &sec, "exhaustive")? == "true",
        });
    }
    Ok(out)
}

/// Margin and `Z_ε` verdicts at the required times.
fn preservation_verdict(snaps: &[Snapshot], h: f64) -> (bool, String) {
    let tol = MARGIN_FACTOR * h;
    let times_ok = REQUIRED_TIMES.iter().all(|t| snaps.iter().any(|s| (s.time - t).abs() < 1e-9));
    let margin_ok = snaps.iter().all(|s| s.margin <= tol);
    let z_ok = snaps.iter().all(|s| s.z.iter().all(|&z| z < 0.0));
    let worst = snaps.iter().map(|s| s.margin).fold(f64::NEG_INFINITY, f64::max);
    let zmax = snaps.iter().flat_map(|s| s.z.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
    (times_ok && margin_ok && z_ok, format!("max m(t)={worst:.3e} (tol {tol:.3e}), max Z_eps={zmax:.3e}"))
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

fn criterion_1() -> Check {
    let dir = tmp();
    let start = Instant::now();
    let (status, fine) = run(Command::ModulusVerify, &load("modulus_1d.cfg", &[])?, dir.path())?;
    let elapsed = start.elapsed();
    let stable = {
        let g = Grid::line(-6.0, 6.0, 0.01).map_err(|e| e.to_string())?;
        let op = assemble_operator(&RadialKernel::indicator(1, 0.5).unwrap(), &g, OperatorMode::FullSpace).map_err(|e| e.to_string())?;
        nhl_core::evolve::stable_dt(&op, 0.5)
    };
    let fine_snaps = snapshots(&fine)?;
    let (ok, detail) = preservation_verdict(&fine_snaps, 0.01);
    let (_, coarse) = run(Command::ModulusVerify, &load("modulus_1d.cfg", &[("grid.h", "0.02")])?, tmp().path())?;
    let coarse_snaps = snapshots(&coarse)?;
    let ratios: Vec<f64> = fine_snaps.iter().zip(&coarse_snaps).map(|(f, c)| f.margin.abs() / c.margin.abs()).collect();
    let halving_ok = ratios.len() == fine_snaps.len() && ratios.iter().all(|r| (HALVING_RATIO.0..=HALVING_RATIO.1).contains(r));
    let pass = ok && status == Status::Passed && halving_ok && elapsed < C1_RUNTIME && 0.01 <= stable;
    let rmax = ratios.iter().copied().fold(0.0, f64::max);
    let rmin = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((pass, format!("{detail}; |m(h)|/|m(2h)| in [{rmin:.3}, {rmax:.3}]; stable_dt={stable}; {elapsed:.1?}")))
}

fn criterion_2() -> Check {
    let dir = tmp();
    let start = Instant::now();
    let (status, report) = run(Command::ModulusVerify, &load("modulus_2d.cfg", &[])?, dir.path())?;
    let elapsed = start.elapsed();
    let snaps = snapshots(&report)?;
    let (ok, detail) = preservation_verdict(&snaps, 0.125);
    let stratified = snaps.iter().all(|s| !s.exhaustive);
    Ok((ok && status == Status::Passed && stratified && elapsed < C2_RUNTIME, format!("{detail}; stratified scan={stratified}; {elapsed:.1?}")))
}

fn criterion_3() -> Check {
    let (status, report) = run(Command::ModulusVerify, &load("regional_1d.cfg", &[])?, tmp().path())?;
    let snaps = snapshots(&report)?;
    let (ok, detail) = preservation_verdict(&snaps, 0.01);
    let near = num(&report, "summary", "pairs_closer_than_2_reach")?;
    let far = num(&report, "summary", "pairs_at_least_2_reach")?;
    Ok((ok && status == Status::Passed && near > 0.0 && far > 0.0, format!("{detail}; pairs |x-y|<2δ: {near}, ≥2δ: {far}")))
}

fn criterion_4() -> Check {
    let (status, report) = run(Command::ModulusVerify, &load("nonlinear_1d.cfg", &[])?, tmp().path())?;
    let snaps = snapshots(&report)?;
    let (ok, detail) = preservation_verdict(&snaps, 0.01);
    let equation_ok = text(&report, "summary", "phi_equation")? == "proof";

    let (linear, zero) = (tmp(), tmp());
    run(Command::Evolve, &load("modulus_1d.cfg", &[])?, linear.path())?;
    let kappa0 = load("modulus_1d.cfg", &[("nonlinear.family", "tanh_p"), ("nonlinear.kappa", "0"), ("nonlinear.c", "1")])?;
    run(Command::Evolve, &kappa0, zero.path())?;
    let mut identical = true;
    let mut files = 0;
    for entry in std::fs::read_dir(linear.path().join("trajectory")).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let a = std::fs::read(linear.path().join("trajectory").join(&name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(zero.path().join("trajectory").join(&name)).map_err(|e| e.to_string())?;
        identical &= a == b;
        files += 1;
    }
    Ok((
        ok && status == Status::Passed && equation_ok && identical && files > 1,
        format!("{detail}; kappa=0 trajectory byte-identical to linear run: {identical} ({files} files)"),
    ))
}

fn criterion_5() -> Check {
    let dir = tmp();
    let start = Instant::now();
    let (status, report) = run(Command::SpectralCounterexample, &load("counterexample.cfg", &[])?, dir.path())?;
    let elapsed = start.elapsed();
    let decreasing = text(&report, "counterexample", "strictly_decreasing")? == "true";
    let q = |l: &str| num(&report, &format!("L={l}"), "quotient");
    let ratio = q("0.1")? / q("0.4")?;
    let mut worst_norm = 0.0f64;
    for l in ["0.4", "0.2", "0.1"] {
        worst_norm = worst_norm.max(num(&report, &format!("L={l}"), "norm2_relative_error")?);
    }
    let csv = std::fs::read_to_string(dir.path().join("counterexample.csv")).map_err(|e| e.to_string())?;
    let flag_reported = csv.starts_with("L,quotient,lambda2,bound_flag") && csv.lines().count() == 4;
    let pass = status == Status::Passed && decreasing && ratio < C5_RATIO && worst_norm < C5_NORM_TOL && flag_reported && elapsed < C5_RUNTIME;
    let flags: Vec<&str> = csv.lines().skip(1).filter_map(|l| l.rsplit(',').next()).collect();
    Ok((
        pass,
        format!("Q(0.1)/Q(0.4)={ratio:.4}; max ‖u‖² rel err={worst_norm:.2e}; 4L²ε² flags {flags:?}; {elapsed:.1?}"),
    ))
}

fn criterion_6() -> Check {
    let (status, report) = run(Command::SpectralLambda2, &load("lambda2_interval.cfg", &[])?, tmp().path())?;
    let (l1, l2) = (num(&report, "spectrum", "lambda1")?, num(&report, "spectrum", "lambda2")?);
    let constant = text(&report, "spectrum", "lambda1_constant_eigenvector")? == "true";
    let violations = num(&report, "variational", "violations")?;
    let trials = num(&report, "variational", "trials")?;
    let base = lambda2(&FormSpec::interval(-1.0, 1.0, 400, 0.5, 1.0).map_err(|e| e.to_string())?, 2).map_err(|e| e.to_string())?.lambda2();
    let mut worst = 0.0f64;
    for k in [0.5f64, 2.0] {
        let spec = FormSpec::interval(-k, k, 400, 0.5, 1.0).map_err(|e| e.to_string())?;
        let lk = lambda2(&spec, 2).map_err(|e| e.to_string())?.lambda2();
        worst = worst.max((lk - k.powf(-1.0) * base).abs() / (k.powf(-1.0) * base));
    }
    let pass = status == Status::Passed && l1.abs() <= C6_ZERO_TOL * l2 && constant && violations == 0.0 && trials == 20.0 && worst <= C6_SCALING_TOL;
    Ok((pass, format!("λ1={l1:.2e}, λ2={l2:.6}; constant eigenvector={constant}; scaling rel err={worst:.2e}; {violations} violations in {trials} trials")))
}

fn criterion_7() -> Check {
    let mut errs = Vec::new();
    for cells in [1024, 2048] {
        let spec = FormSpec::interval(0.0, 1.0, cells, 0.25, 2.0).map_err(|e| e.to_string())?;
        let u = sample_function_to_field(|x| x[0], spec.grid(), None).map_err(|e| e.to_string())?;
        errs.push((energy_form(&u, &spec).map_err(|e| e.to_string())? - C7_EXACT).abs() / C7_EXACT);
    }
    Ok((errs[1] <= C7_TOL && errs[1] < errs[0], format!("rel err 1024: {:.3e}, 2048: {:.3e}", errs[0], errs[1])))
}

fn criterion_8() -> Check {
    let k = RadialKernel::indicator(1, 0.6).unwrap();
    let g = Grid::line(-1.0, 1.0, 0.02).map_err(|e| e.to_string())?;
    let op = assemble_operator(&k, &g, OperatorMode::Regional).map_err(|e| e.to_string())?;
    let spectrum = generator_spectrum(&op, 3).map_err(|e| e.to_string())?;
    let l2 = spectrum.lambda2();
    let v = &spectrum.eigenvectors[1];
    let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let u0 = ScalarField::new(g.clone(), v.iter().map(|x| 0.5 * x / sup).collect(), 0.0, None).map_err(|e| e.to_string())?;
    let evolve = |u: ScalarField, t_end: f64| {
        evolve_linear(&EvolutionProblem { operator: &op, initial: u, scheme: Scheme::Rk4, dt: 0.01, t_end, nonlinear: None, snapshot_stride: 10 })
            .map_err(|e| e.to_string())
    };
    let fit = oscillation_decay_rate(&evolve(u0, 4.0)?).map_err(|e| e.to_string())?;
    let rel = (fit.rate - l2).abs() / l2;
    let generic = sample_function_to_field(|x| 0.5 * x[0] + 0.3 * x[0] * x[0] - 0.2 * (3.0 * x[0]).cos(), &g, None).map_err(|e| e.to_string())?;
    let traj = evolve(generic, 8.0)?;
    let n = traj.snapshots.len();
    let mut window_errs = Vec::new();
    for w in 0..4 {
        let f = fit_decay_window(&traj, w * n / 4, (w + 1) * n / 4).map_err(|e| e.to_string())?;
        window_errs.push((f.rate - l2).abs() / l2);
    }
    let converging = window_errs.windows(2).all(|w| w[1] < w[0]);
    Ok((
        rel <= C8_TOL && converging,
        format!("λ2={l2:.6}, eigenvector fit rel err={rel:.2e}; generic window errs {:?}", window_errs.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>()),
    ))
}

fn cli(command: &str, cfg_text: &str) -> Result<i32, String> {
    let dir = tmp();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, cfg_text).map_err(|e| e.to_string())?;
    let status = Process::new(env!("CARGO_BIN_EXE_nhl"))
        .args([command, "--config", cfg.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?
        .status;
    status.code().ok_or_else(|| "killed by signal".to_string())
}

fn read_config(name: &str) -> Result<String, String> {
    std::fs::read_to_string(configs().join(name)).map_err(|e| e.to_string())
}

fn criterion_9() -> Check {
    let coupling = read_config("coupling.cfg")?;
    let suite = cli("coupling-check", &coupling)?;
    let shifted = cli("coupling-check", &format!("{coupling}coupling.shift = 0.1\n"))?;
    let modulus = read_config("modulus_1d.cfg")?.replace("grid.h = 0.01", "grid.h = 0.05");
    let undersized = cli("modulus-verify", &format!("{modulus}modulus.lambda = 0.25\n"))?;
    Ok((
        suite == 0 && shifted == 2 && undersized == 2,
        format!("suite exit {suite}; shifted kernel exit {shifted}; undersized φ exit {undersized}"),
    ))
}

fn criterion_10() -> Check {
    let dir = tmp();
    let cfg = configs().join("probe_2d.cfg");
    let out = dir.path().join("probe");
    let code = Process::new(env!("CARGO_BIN_EXE_nhl"))
        .args(["probe-regional-2d", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?
        .status
        .code();
    let report = std::fs::read_to_string(out.join("report.txt")).map_err(|e| e.to_string())?;
    let series = std::fs::read_to_string(out.join("margin.csv")).map_err(|e| e.to_string())?;
    let points = series.lines().count().saturating_sub(1);
    let last = series.lines().last().unwrap_or("").to_string();
    Ok((
        code == Some(0) && report.contains("[margin]") && report.contains("verdict: none") && points >= 2,
        format!("exit {code:?}; {points} margin samples; last (t, m) = {last}"),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("modulus preservation, 1D full line", criterion_1),
        ("modulus preservation, 2D full space", criterion_2),
        ("modulus preservation, 1D regional", criterion_3),
        ("non-linear modulus preservation", criterion_4),
        ("counterexample scaling", criterion_5),
        ("eigen-structure", criterion_6),
        ("energy oracle", criterion_7),
        ("oscillation decay vs spectral gap", criterion_8),
        ("coupling identities and negative controls", criterion_9),
        ("regional 2D probe", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {:>2} [{}] {name}: {detail}", k + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
