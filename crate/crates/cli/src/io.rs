use std::fs;
use std::path::Path;

use serde::Serialize;

use hybridbvp::coupled::{registry, ProblemSpec};
use hybridbvp::engine::TraceRow;
use hybridbvp::grid::{Grid, GridFunction};

use crate::{Failure, ProblemArgs};

/// Lossless decimal form of an `f64` (17 significant digits).
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn input(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{context}: {e}"))
}

/// Registry entry or JSON file, with the command-line overrides applied.
pub fn load_problem(args: &ProblemArgs) -> Result<ProblemSpec, Failure> {
    let mut spec = match (&args.problem, &args.config) {
        (Some(name), _) => registry(name)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| input(path.display(), e))?;
            serde_json::from_str::<ProblemSpec>(&text).map_err(|e| input(path.display(), e))?
        }
        (None, None) => return Err(Failure::Input("one of --problem or --config is required".into())),
    };
    if let Some(n) = args.n_cells {
        spec.n_cells = n;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| input(dir.display(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| input(path.display(), e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| input(path.display(), e))
}

/// `t,u,v` rows, one per node.
pub fn write_solution(path: &Path, u: &GridFunction, v: &GridFunction) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| input(path.display(), e))?;
    let err = |e: csv::Error| input(path.display(), e);
    w.write_record(["t", "u", "v"]).map_err(err)?;
    let grid = u.grid();
    for i in 0..grid.n_nodes() {
        w.write_record([float(grid.node(i)), float(u.values()[i]), float(v.values()[i])])
            .map_err(err)?;
    }
    w.flush().map_err(|e| input(path.display(), e))
}

pub fn write_columns(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| input(path.display(), e))?;
    let err = |e: csv::Error| input(path.display(), e);
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row.iter().map(|x| float(*x))).map_err(err)?;
    }
    w.flush().map_err(|e| input(path.display(), e))
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| input(path.display(), e))?;
    let err = |e: csv::Error| input(path.display(), e);
    w.write_record(["stage", "iter", "residual", "step", "clipped"]).map_err(err)?;
    for r in trace {
        w.write_record([
            r.stage.to_string(),
            r.iter.to_string(),
            float(r.residual),
            float(r.step),
            r.clipped.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| input(path.display(), e))
}

/// Reads column `name` of a CSV with a `t` column on a uniform grid over
/// `[0, 1]`.
pub fn read_grid_column(path: &Path, name: &str) -> Result<GridFunction, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(|e| input(path.display(), e))?;
    let headers = r.headers().map_err(|e| input(path.display(), e))?.clone();
    let find = |col: &str| {
        headers
            .iter()
            .position(|h| h.trim() == col)
            .ok_or_else(|| Failure::Input(format!("{}: no `{col}` column", path.display())))
    };
    let (it, iv) = (find("t")?, find(name)?);
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| input(path.display(), e))?;
        let parse = |i: usize| {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|e| input(format!("{} row {}", path.display(), line + 2), e))
        };
        ts.push(parse(it)?);
        vs.push(parse(iv)?);
    }
    if ts.len() < 3 {
        return Err(Failure::Input(format!("{}: need at least 3 rows", path.display())));
    }
    let grid = Grid::new(ts.len() - 1)?;
    for (i, t) in ts.iter().enumerate() {
        if (t - grid.node(i)).abs() > 1e-9 {
            return Err(Failure::Input(format!(
                "{}: t = {t} in row {} is not the uniform node {}",
                path.display(),
                i + 2,
                grid.node(i)
            )));
        }
    }
    Ok(GridFunction::new(grid, vs)?)
}
