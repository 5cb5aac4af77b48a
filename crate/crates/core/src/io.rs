//! Text formats.
//!
//! Native field format: a header line `n_x n_t dx dt x_min t_min`, then `n_x` lines
//! of `n_t` whitespace-separated speeds (km/h), row `j = 0` first. Missing cells are
//! written `nan`. Masks use the same layout with `0`/`1` entries.
//!
//! Trajectory format: comma-separated with the header
//! `vehicle_id,time_s,position_m,speed_kmh`. Rows of one vehicle may be interleaved
//! with others but must be in increasing time order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::admm::TraceRow;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ObservationMask, Sample, SpeedField, Trajectory};

const FEET: f64 = 0.3048;

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn format_header(grid: &GridSpec) -> String {
    format!(
        "{} {} {} {} {} {}\n",
        grid.n_x, grid.n_t, grid.dx, grid.dt, grid.x_min, grid.t_min
    )
}

fn format_matrix(grid: &GridSpec, values: &Array2<f64>) -> String {
    let mut out = format_header(grid);
    for row in values.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            if v.is_nan() {
                out.push_str("nan");
            } else {
                write!(out, "{v}").expect("writing to a String");
            }
        }
        out.push('\n');
    }
    out
}

pub fn format_field(field: &SpeedField) -> String {
    format_matrix(field.grid(), field.values())
}

/// Writes any matrix on `grid` in the native layout (weights, for example).
pub fn format_grid_matrix(grid: &GridSpec, values: &Array2<f64>) -> String {
    format_matrix(grid, values)
}

pub fn format_mask(mask: &ObservationMask) -> String {
    format_matrix(mask.grid(), &mask.indicator())
}

fn parse_matrix(text: &str, path: &Path) -> Result<(GridSpec, Array2<f64>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 {
        return Err(parse_err(path, hline, "header must be `n_x n_t dx dt x_min t_min`"));
    }
    let count = |s: &str, name: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_err(path, hline, format!("{name} must be a non-negative integer, got `{s}`")))
    };
    let real = |s: &str, name: &str| {
        s.parse::<f64>()
            .map_err(|_| parse_err(path, hline, format!("{name} must be a number, got `{s}`")))
    };
    let grid = GridSpec::new(
        real(h[4], "x_min")?,
        real(h[5], "t_min")?,
        real(h[2], "dx")?,
        real(h[3], "dt")?,
        count(h[0], "n_x")?,
        count(h[1], "n_t")?,
    )
    .map_err(|e| parse_err(path, hline, e.to_string()))?;

    let mut values = Vec::with_capacity(grid.cell_count());
    let mut rows = 0;
    for (lineno, line) in lines {
        if rows == grid.n_x {
            return Err(parse_err(path, lineno, format!("more than {} data rows", grid.n_x)));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v = if tok.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                tok.parse::<f64>()
                    .map_err(|_| parse_err(path, lineno, format!("not a number: `{tok}`")))?
            };
            values.push(v);
        }
        if values.len() - before != grid.n_t {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {} values, found {}", grid.n_t, values.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != grid.n_x {
        return Err(parse_err(path, 0, format!("expected {} data rows, found {rows}", grid.n_x)));
    }
    let values = Array2::from_shape_vec(grid.shape(), values).expect("row and column counts checked");
    Ok((grid, values))
}

pub fn parse_field(text: &str, path: &Path) -> Result<SpeedField> {
    let (grid, values) = parse_matrix(text, path)?;
    SpeedField::new(grid, values).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn parse_mask(text: &str, path: &Path) -> Result<ObservationMask> {
    let (grid, values) = parse_matrix(text, path)?;
    if let Some(v) = values.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(parse_err(path, 0, format!("mask entries must be 0 or 1, found {v}")));
    }
    ObservationMask::new(grid, values.mapv(|v| v == 1.0))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<SpeedField> {
    parse_field(&read_text(path)?, path)
}

pub fn write_field(path: &Path, field: &SpeedField) -> Result<()> {
    write_text(path, &format_field(field))
}

pub fn read_mask(path: &Path) -> Result<ObservationMask> {
    parse_mask(&read_text(path)?, path)
}

pub fn write_mask(path: &Path, mask: &ObservationMask) -> Result<()> {
    write_text(path, &format_mask(mask))
}

/// Groups rows by vehicle, preserving first-appearance order of vehicles.
fn group_samples(rows: Vec<(String, Sample, usize)>, path: &Path) -> Result<Vec<Trajectory>> {
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, Vec<(Sample, usize)>> = BTreeMap::new();
    for (id, s, line) in rows {
        let entry = by_id.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        entry.push((s, line));
    }
    order
        .into_iter()
        .map(|id| {
            let samples = by_id.remove(&id).expect("id recorded on insert");
            if let Some(w) = samples.windows(2).find(|w| w[1].0.t <= w[0].0.t) {
                return Err(parse_err(path, w[1].1, format!("vehicle {id}: time not increasing")));
            }
            if let Some((s, line)) = samples.iter().find(|(s, _)| s.v < 0.0 || !s.v.is_finite()) {
                return Err(parse_err(path, *line, format!("vehicle {id}: invalid speed {}", s.v)));
            }
            Trajectory::new(id, samples.into_iter().map(|(s, _)| s).collect())
        })
        .collect()
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn record_line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn column(headers: &csv::StringRecord, names: &[&str], path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
        .ok_or_else(|| parse_err(path, 1, format!("missing column `{}`", names[0])))
}

/// Reads the native trajectory format.
pub fn parse_trajectories(text: &str, path: &Path) -> Result<Vec<Trajectory>> {
    let mut rdr = csv_reader(text);
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let id = column(&headers, &["vehicle_id"], path)?;
    let t = column(&headers, &["time_s"], path)?;
    let x = column(&headers, &["position_m"], path)?;
    let v = column(&headers, &["speed_kmh"], path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record_line(&rec);
        let num = |i: usize, name: &str| {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("{name}: not a number: `{}`", &rec[i])))
        };
        let sample = Sample {
            t: num(t, "time_s")?,
            x: num(x, "position_m")?,
            v: num(v, "speed_kmh")?,
        };
        rows.push((rec[id].to_string(), sample, line));
    }
    group_samples(rows, path)
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    parse_trajectories(&read_text(path)?, path)
}

pub fn format_trajectories(trajectories: &[Trajectory]) -> String {
    let mut out = String::from("vehicle_id,time_s,position_m,speed_kmh\n");
    for tr in trajectories {
        for s in tr.samples() {
            writeln!(out, "{},{},{},{}", tr.vehicle_id(), s.t, s.x, s.v).expect("writing to a String");
        }
    }
    out
}

/// Converts an NGSIM trajectory extract (comma-separated, with the standard
/// `Vehicle_ID`, `Frame_ID`, `Local_Y`, `v_Vel`, `Lane_ID` columns) to trajectories.
///
/// Time is `Frame_ID * 0.1` s, position is `Local_Y` converted from feet to metres,
/// speed is `v_Vel` converted from ft/s to km/h. Only rows in `lane` are kept.
pub fn parse_ngsim(text: &str, path: &Path, lane: u32) -> Result<Vec<Trajectory>> {
    let mut rdr = csv_reader(text);
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let id = column(&headers, &["Vehicle_ID"], path)?;
    let frame = column(&headers, &["Frame_ID"], path)?;
    let y = column(&headers, &["Local_Y"], path)?;
    let vel = column(&headers, &["v_Vel", "v_Velocity"], path)?;
    let lane_col = column(&headers, &["Lane_ID"], path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record_line(&rec);
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("column {}: not a number: `{}`", &headers[i], &rec[i])))
        };
        if num(lane_col)? != lane as f64 {
            continue;
        }
        let sample = Sample {
            t: num(frame)? * 0.1,
            x: num(y)? * FEET,
            v: num(vel)? * FEET * 3.6,
        };
        rows.push((rec[id].to_string(), sample, line));
    }
    // NGSIM files are not guaranteed to be frame-sorted per vehicle
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.t.total_cmp(&b.1.t)));
    group_samples(rows, path)
}

pub fn read_ngsim(path: &Path, lane: u32) -> Result<Vec<Trajectory>> {
    parse_ngsim(&read_text(path)?, path, lane)
}

/// Tab-separated table with a header row.
#[derive(Debug, Clone, Default)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// `iter  objective  r_primal  r_dual`
pub fn trace_table(trace: &[TraceRow]) -> Table {
    let mut t = Table::new(["iter", "objective", "r_primal", "r_dual"]);
    for r in trace {
        t.push([r.iter.to_string(), r.objective.to_string(), r.primal.to_string(), r.dual.to_string()]);
    }
    t
}
