//! Snapshot CSVs, trajectory directories and key/value reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::discretize::{Grid, ScalarField};
use crate::error::{Error, Result};
use crate::evolve::Trajectory;
use crate::spectral::CounterexampleReport;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Coordinates then value, one node per row, preceded by `# t=`, `# h=` and
/// `# far_field=` comment lines.
pub fn snapshot_to_string(field: &ScalarField) -> String {
    let grid = &field.grid;
    let mut out = String::with_capacity(48 * grid.len());
    let _ = writeln!(out, "# t={}", num(field.time));
    let [hx, hy] = grid.spacing();
    if grid.dim() == 2 && !grid.is_isotropic() {
        let _ = writeln!(out, "# h={},{}", num(hx), num(hy));
    } else {
        let _ = writeln!(out, "# h={}", num(hx));
    }
    match field.far_field {
        Some((a, b)) => {
            let _ = writeln!(out, "# far_field={},{}", num(a), num(b));
        }
        None => out.push_str("# far_field=none\n"),
    }
    for (p, v) in grid.points().zip(&field.values) {
        if grid.dim() == 1 {
            let _ = writeln!(out, "{},{}", num(p[0]), num(*v));
        } else {
            let _ = writeln!(out, "{},{},{}", num(p[0]), num(p[1]), num(*v));
        }
    }
    out
}

pub fn write_snapshot(field: &ScalarField, path: &Path) -> Result<()> {
    fs::write(path, snapshot_to_string(field)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<ScalarField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text, path)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn parse_f64(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| parse_err(path, line, format!("bad number `{}`: {e}", s.trim())))
}

/// Parses the snapshot format; `path` is only used in error messages.
pub fn parse_snapshot(text: &str, path: &Path) -> Result<ScalarField> {
    let (mut time, mut spacing, mut far) = (None, None, None::<Option<(f64, f64)>>);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(header) = l.strip_prefix('#') {
            let header = header.trim();
            if let Some(v) = header.strip_prefix("t=") {
                time = Some(parse_f64(v, path, line)?);
            } else if let Some(v) = header.strip_prefix("h=") {
                let parts = v.split(',').map(|p| parse_f64(p, path, line)).collect::<Result<Vec<_>>>()?;
                spacing = Some(match parts[..] {
                    [h] => [h, h],
                    [a, b] => [a, b],
                    _ => return Err(parse_err(path, line, "h needs one or two values")),
                });
            } else if let Some(v) = header.strip_prefix("far_field=") {
                far = Some(if v.trim() == "none" {
                    None
                } else {
                    let parts = v.split(',').map(|p| parse_f64(p, path, line)).collect::<Result<Vec<_>>>()?;
                    match parts[..] {
                        [a, b] => Some((a, b)),
                        _ => return Err(parse_err(path, line, "far_field needs two values or `none`")),
                    }
                });
            }
            continue;
        }
        let row = l.split(',').map(|p| parse_f64(p, path, line)).collect::<Result<Vec<_>>>()?;
        if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
            return Err(parse_err(path, line, format!("row {}: non-finite entry in column {}", rows.len(), bad + 1)));
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(path, line, format!("expected {} columns, got {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    let time = time.ok_or_else(|| parse_err(path, 0, "missing `# t=` header"))?;
    let spacing = spacing.ok_or_else(|| parse_err(path, 0, "missing `# h=` header"))?;
    let far = far.unwrap_or(None);
    let Some(first) = rows.first() else {
        return Err(parse_err(path, 0, "no data rows"));
    };
    let dim = match first.len() {
        2 => 1,
        3 => 2,
        c => return Err(parse_err(path, 0, format!("expected 2 or 3 columns, got {c}"))),
    };
    let counts = if dim == 1 {
        [rows.len(), 1]
    } else {
        let inner = rows.iter().take_while(|r| r[0] == first[0]).count();
        if rows.len() % inner != 0 {
            return Err(Error::GridMismatch(format!("{} rows do not form a tensor grid", rows.len())));
        }
        [rows.len() / inner, inner]
    };
    let lower = [first[0], if dim == 2 { first[1] } else { 0.0 }];
    let grid = Grid::from_parts(dim, lower, spacing, counts)?;
    let scale = 1e-9 * spacing[0].min(spacing[1]);
    for (i, (r, p)) in rows.iter().zip(grid.points()).enumerate() {
        if (0..dim).any(|a| (r[a] - p[a]).abs() > scale) {
            return Err(Error::GridMismatch(format!("row {i}: coordinates {:?} off the uniform grid", &r[..dim])));
        }
    }
    let values = rows.iter().map(|r| r[dim]).collect();
    ScalarField::new(grid, values, time, far)
}

/// `snapshot_NNNNN.csv` files plus `index.csv` (`index,t,file`).
pub fn write_trajectory(traj: &Trajectory, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = String::from("index,t,file\n");
    for (k, snap) in traj.snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:05}.csv");
        write_snapshot(snap, &dir.join(&name))?;
        let _ = writeln!(index, "{k},{},{name}", num(snap.time));
    }
    let path = dir.join("index.csv");
    fs::write(&path, index).map_err(|e| Error::io(path, e))
}

/// Snapshots listed in `dir/index.csv`, in order.
pub fn read_trajectory(dir: &Path) -> Result<Vec<ScalarField>> {
    let path = dir.join("index.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(parse_err(&path, k + 1, "expected index,t,file"));
        }
        let snap = read_snapshot(&dir.join(cols[2].trim()))?;
        let t = parse_f64(cols[1], &path, k + 1)?;
        if snap.time != t {
            return Err(Error::TimeMismatch(format!("index lists t={t}, file {} holds t={}", cols[2], snap.time)));
        }
        out.push(snap);
    }
    Ok(out)
}

/// Plain-text report of `key: value` lines grouped under `[section]` headers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts a new section; later `line` calls go into it.
    pub fn section(&mut self, name: impl Into<String>) -> &mut Self {
        self.sections.push((name.into(), Vec::new()));
        self
    }

    pub fn line(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        if self.sections.is_empty() {
            self.section("summary");
        }
        let last = self.sections.last_mut().expect("section exists");
        last.1.push((key.into(), value.to_string()));
        self
    }

    pub fn append(&mut self, other: Report) {
        self.sections.extend(other.sections);
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .filter(|(s, _)| s == section)
            .flat_map(|(_, lines)| lines.iter())
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn sections(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(s, _)| s.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, (name, lines)) in self.sections.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (key, value) in lines {
                let _ = writeln!(out, "{key}: {value}");
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

/// `L,quotient,lambda2,bound_flag`; `lambda2` is empty when not computed.
pub fn counterexample_csv(report: &CounterexampleReport) -> String {
    let mut out = String::from("L,quotient,lambda2,bound_flag\n");
    for row in &report.rows {
        let l2 = row.lambda2.map(|(l, _)| num(l)).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", num(row.length), num(row.quotient), l2, row.bound_holds);
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}
