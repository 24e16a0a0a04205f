//! CSV formats: nodal fields, traces, slices, boundary controls and gain files.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use heatctl_core::simulate::{SimTrace, Snapshot};
use heatctl_core::{BoundaryField, BoundaryScheme, Grid, ScalarField};

use crate::error::{CliError, CliResult};

fn writer(path: &Path) -> CliResult<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let f = File::create(path).map_err(CliError::io(path))?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Format { path: path.to_path_buf(), message: e.to_string() }
}

/// 15 significant digits, for traces and plot data.
fn num(v: f64) -> String {
    format!("{v:.14e}")
}

/// Shortest representation that reads back to the same `f64`, for files
/// that are reloaded (fields, gains).
fn exact(v: f64) -> String {
    format!("{v:e}")
}

/// `x,y,value` over every node, `i` fastest; Dirichlet nodes carry 0.
pub fn write_field(path: &Path, w: &ScalarField) -> CliResult<()> {
    let g = w.grid();
    let mut out = writer(path)?;
    let e = csv_err(path);
    out.write_record(["x", "y", "value"]).map_err(&e)?;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let (x, y) = g.coords(i, j);
            out.write_record([exact(x), exact(y), exact(w.at(i, j))]).map_err(&e)?;
        }
    }
    out.flush().map_err(CliError::io(path))
}

/// Reads a field written by [`write_field`] (or any file with the same node order).
/// Values on the Dirichlet edges are discarded.
pub fn read_field(path: &Path, grid: Grid) -> CliResult<ScalarField> {
    let fmt = |message: String| CliError::Format { path: path.to_path_buf(), message };
    let mut rd = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = rd.headers().map_err(csv_err(path))?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["x", "y", "value"] {
        return Err(fmt(format!("expected header `x,y,value`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let tol = 1e-9 * grid.a().max(grid.b());
    let mut values = vec![0.0; grid.free_count()];
    let mut count = 0;
    for (n, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = n + 2;
        let parse = |k: usize| -> CliResult<f64> {
            let s = rec.get(k).unwrap_or("").trim();
            s.parse().map_err(|_| fmt(format!("line {line}: `{s}` is not a number")))
        };
        let (x, y, v) = (parse(0)?, parse(1)?, parse(2)?);
        if count >= grid.node_count() {
            return Err(fmt(format!("line {line}: more than {} nodes", grid.node_count())));
        }
        let (i, j) = (count % grid.nx(), count / grid.nx());
        let (ex, ey) = grid.coords(i, j);
        if (x - ex).abs() > tol || (y - ey).abs() > tol {
            return Err(fmt(format!("line {line}: node ({x}, {y}) does not match grid node ({ex}, {ey})")));
        }
        if let Some(k) = grid.free_index(i, j) {
            values[k] = v;
        }
        count += 1;
    }
    if count != grid.node_count() {
        return Err(fmt(format!("expected {} nodes for a {}x{} grid, found {count}", grid.node_count(), grid.nx(), grid.ny())));
    }
    Ok(ScalarField::from_values(grid, values)?)
}

/// `t,norm_w,norm_v,u_v,y_v` plus the two error norms in observer runs.
pub fn write_trace(path: &Path, trace: &SimTrace) -> CliResult<()> {
    let mut out = writer(path)?;
    let e = csv_err(path);
    let observer = trace.rows.first().is_some_and(|r| r.err.is_some());
    let mut header = vec!["t", "norm_w", "norm_v", "u_v", "y_v"];
    if observer {
        header.extend(["norm_err_w", "norm_err_v"]);
    }
    out.write_record(&header).map_err(&e)?;
    for r in &trace.rows {
        let mut rec = vec![num(r.t), num(r.norm_w), num(r.norm_v), num(r.u_v), num(r.y_v)];
        if let Some((ew, ev)) = r.err {
            rec.extend([num(ew), num(ev)]);
        }
        out.write_record(&rec).map_err(&e)?;
    }
    out.flush().map_err(CliError::io(path))
}

pub fn snapshot_path(dir: &Path, s: &Snapshot) -> PathBuf {
    dir.join(format!("w_t{}.csv", s.index))
}

fn nearest_row(g: &Grid, y: f64) -> usize {
    ((y / g.hy()).round() as usize).min(g.ny() - 1)
}

/// `t,x,value` for `w(x, y_slice, t)` over the given snapshots.
pub fn write_slice(path: &Path, snapshots: &[Snapshot], y_slice: f64) -> CliResult<()> {
    let mut out = writer(path)?;
    let e = csv_err(path);
    out.write_record(["t", "x", "value"]).map_err(&e)?;
    for s in snapshots {
        let g = s.w.grid();
        let j = nearest_row(g, y_slice);
        for i in 0..g.nx() {
            out.write_record([num(s.t), num(g.coords(i, j).0), num(s.w.at(i, j))]).map_err(&e)?;
        }
    }
    out.flush().map_err(CliError::io(path))
}

/// Which Neumann edge to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// `y = b`, parametrized by `x`.
    Top,
    /// `x = a`, parametrized by `y`.
    Right,
}

pub fn edge_nodes(g: &Grid, edge: Edge) -> Vec<(usize, usize)> {
    match edge {
        Edge::Top => (1..g.nx()).map(|i| (i, g.ny() - 1)).collect(),
        Edge::Right => (1..g.ny()).map(|j| (g.nx() - 1, j)).collect(),
    }
}

/// `t,s,value` for the boundary state along one edge (`s` is `x` or `y`).
pub fn write_control(path: &Path, snapshots: &[Snapshot], edge: Edge) -> CliResult<()> {
    let mut out = writer(path)?;
    let e = csv_err(path);
    out.write_record(["t", if edge == Edge::Top { "x" } else { "y" }, "value"]).map_err(&e)?;
    for s in snapshots {
        let g = s.v.grid();
        for (i, j) in edge_nodes(g, edge) {
            let (x, y) = g.coords(i, j);
            let k = g.gamma1_index(i, j).expect("edge node lies on the Neumann boundary");
            let coord = if edge == Edge::Top { x } else { y };
            out.write_record([num(s.t), num(coord), num(s.v.values()[k])]).map_err(&e)?;
        }
    }
    out.flush().map_err(CliError::io(path))
}

/// Everything needed to rebuild a synthesis without recomputing gains.
#[derive(Debug, Clone, PartialEq)]
pub struct GainFile {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nx: usize,
    pub ny: usize,
    pub scheme: BoundaryScheme,
    pub lambda: Vec<f64>,
    pub f: Vec<f64>,
    pub l: Vec<f64>,
    pub j: Vec<f64>,
    pub k: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// `key,index,value` rows; scalars use index 0.
pub fn write_gains(path: &Path, gf: &GainFile) -> CliResult<()> {
    let mut out = writer(path)?;
    let e = csv_err(path);
    out.write_record(["key", "index", "value"]).map_err(&e)?;
    let scalars = [
        ("mu", exact(gf.mu)),
        ("alpha", exact(gf.alpha)),
        ("beta", exact(gf.beta)),
        ("nx", gf.nx.to_string()),
        ("ny", gf.ny.to_string()),
        ("scheme", gf.scheme.to_string()),
    ];
    for (k, v) in scalars {
        out.write_record([k, "0", &v]).map_err(&e)?;
    }
    let vectors = [("lambda", &gf.lambda), ("f", &gf.f), ("l", &gf.l), ("j", &gf.j), ("k", &gf.k), ("p", &gf.p), ("q", &gf.q)];
    for (k, vs) in vectors {
        for (i, v) in vs.iter().enumerate() {
            out.write_record([k, &(i + 1).to_string(), &exact(*v)]).map_err(&e)?;
        }
    }
    out.flush().map_err(CliError::io(path))
}

pub fn read_gains(path: &Path) -> CliResult<GainFile> {
    let fmt = |message: String| CliError::Format { path: path.to_path_buf(), message };
    let mut rd = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut gf = GainFile {
        mu: f64::NAN,
        alpha: f64::NAN,
        beta: f64::NAN,
        nx: 0,
        ny: 0,
        scheme: BoundaryScheme::default(),
        lambda: vec![],
        f: vec![],
        l: vec![],
        j: vec![],
        k: vec![],
        p: vec![],
        q: vec![],
    };
    for (n, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = n + 2;
        let (key, index, value) = match (rec.get(0), rec.get(1), rec.get(2)) {
            (Some(k), Some(i), Some(v)) => (k.trim(), i.trim(), v.trim()),
            _ => return Err(fmt(format!("line {line}: expected key,index,value"))),
        };
        let index: usize = index.parse().map_err(|_| fmt(format!("line {line}: bad index `{index}`")))?;
        let float = || value.parse::<f64>().map_err(|_| fmt(format!("line {line}: `{value}` is not a number")));
        let int = || value.parse::<usize>().map_err(|_| fmt(format!("line {line}: `{value}` is not an integer")));
        let vector = match key {
            "mu" => {
                gf.mu = float()?;
                continue;
            }
            "alpha" => {
                gf.alpha = float()?;
                continue;
            }
            "beta" => {
                gf.beta = float()?;
                continue;
            }
            "nx" => {
                gf.nx = int()?;
                continue;
            }
            "ny" => {
                gf.ny = int()?;
                continue;
            }
            "scheme" => {
                gf.scheme = value.parse().map_err(|e| fmt(format!("line {line}: {e}")))?;
                continue;
            }
            "lambda" => &mut gf.lambda,
            "f" => &mut gf.f,
            "l" => &mut gf.l,
            "j" => &mut gf.j,
            "k" => &mut gf.k,
            "p" => &mut gf.p,
            "q" => &mut gf.q,
            other => return Err(fmt(format!("line {line}: unknown key `{other}`"))),
        };
        if index != vector.len() + 1 {
            return Err(fmt(format!("line {line}: `{key}` entries must be numbered 1, 2, ... in order")));
        }
        vector.push(float()?);
    }
    if gf.mu.is_nan() || gf.alpha.is_nan() || gf.beta.is_nan() || gf.nx == 0 || gf.ny == 0 {
        return Err(fmt("missing one of mu, alpha, beta, nx, ny".into()));
    }
    Ok(gf)
}

pub fn boundary_from(grid: Grid, values: &[f64], path: &Path, what: &str) -> CliResult<BoundaryField> {
    BoundaryField::from_values(grid, values.to_vec())
        .map_err(|e| CliError::Format { path: path.to_path_buf(), message: format!("`{what}`: {e}") })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(1.0, 0.5, 7, 5).unwrap();
        let w = ScalarField::from_fn(g, |x, y| x * x - 3.0 * y + 1.0);
        let path = dir.path().join("w.csv");
        write_field(&path, &w).unwrap();
        assert_eq!(read_field(&path, g).unwrap(), w);
        let other = Grid::new(1.0, 0.5, 5, 5).unwrap();
        assert!(read_field(&path, other).is_err());
    }

    #[test]
    fn gains_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let gf = GainFile {
            mu: 6.0,
            alpha: 3.0,
            beta: 2.5,
            nx: 21,
            ny: 21,
            scheme: BoundaryScheme::OneSided,
            lambda: vec![1.07],
            f: vec![-0.3],
            l: vec![15.0],
            j: vec![-0.98],
            k: vec![3.19],
            p: vec![0.1, 0.2, 0.3],
            q: vec![1.0, 2.0, 3.0],
        };
        let path = dir.path().join("gains.csv");
        write_gains(&path, &gf).unwrap();
        assert_eq!(read_gains(&path).unwrap(), gf);
        fs::write(&path, "key,index,value\nmu,0,1\nwhat,0,2\n").unwrap();
        let err = read_gains(&path).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }
}
