//! Plain-text serialisation of simulation outputs.
//!
//! All tables are rendered as UTF-8 CSV with LF line endings and floats
//! printed with 17 significant digits, which round-trips every finite `f64`
//! exactly. Rendering is pure string work; callers decide where the bytes
//! go. Each renderer has a parser that restores the table bit-for-bit.

use crate::error::{Error, Result};
use crate::montecarlo::{MomentReport, StrongErrorReport};
use crate::pricing::PriceReport;
use crate::scheme::Trajectory;

/// Shortest-guaranteed-lossless float rendering used in every artifact.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_float(field: &str, context: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Report(format!("bad float {field:?} in {context}")))
}

fn parse_count(field: &str, context: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::Report(format!("bad count {field:?} in {context}")))
}

/// Splits CSV content into the header line and data rows of expected arity.
fn rows<'a>(content: &'a str, header: &str) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = content.lines();
    match lines.next() {
        Some(first) if first == header => {}
        other => {
            return Err(Error::Report(format!(
                "expected header {header:?}, found {other:?}"
            )))
        }
    }
    let arity = header.split(',').count();
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != arity {
            return Err(Error::Report(format!(
                "row {} has {} fields, expected {arity}",
                idx + 2,
                fields.len()
            )));
        }
        out.push(fields);
    }
    Ok(out)
}

/// One grid point per row: `t,x,y`.
pub fn render_trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x,y\n");
    for ((t, x), y) in traj.times.iter().zip(&traj.x).zip(&traj.y) {
        out.push_str(&format_float(*t));
        out.push(',');
        out.push_str(&format_float(*x));
        out.push(',');
        out.push_str(&format_float(*y));
        out.push('\n');
    }
    out
}

/// The grid columns of a trajectory file. Step diagnostics are not part of
/// the CSV surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn parse_trajectory_csv(content: &str) -> Result<TrajectoryTable> {
    let rows = rows(content, "t,x,y")?;
    let mut table = TrajectoryTable {
        times: Vec::with_capacity(rows.len()),
        x: Vec::with_capacity(rows.len()),
        y: Vec::with_capacity(rows.len()),
    };
    for row in rows {
        table.times.push(parse_float(row[0], "trajectory")?);
        table.x.push(parse_float(row[1], "trajectory")?);
        table.y.push(parse_float(row[2], "trajectory")?);
    }
    Ok(table)
}

/// One grid time per row: `t,moment_x,se_x,moment_y,se_y`.
pub fn render_moments_csv(rep: &MomentReport) -> String {
    let mut out = String::from("t,moment_x,se_x,moment_y,se_y\n");
    for k in 0..rep.times.len() {
        for (i, v) in [
            rep.times[k],
            rep.moment_x[k],
            rep.se_x[k],
            rep.moment_y[k],
            rep.se_y[k],
        ]
        .iter()
        .enumerate()
        {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentsTable {
    pub times: Vec<f64>,
    pub moment_x: Vec<f64>,
    pub se_x: Vec<f64>,
    pub moment_y: Vec<f64>,
    pub se_y: Vec<f64>,
}

pub fn parse_moments_csv(content: &str) -> Result<MomentsTable> {
    let rows = rows(content, "t,moment_x,se_x,moment_y,se_y")?;
    let mut t = MomentsTable {
        times: Vec::new(),
        moment_x: Vec::new(),
        se_x: Vec::new(),
        moment_y: Vec::new(),
        se_y: Vec::new(),
    };
    for row in rows {
        t.times.push(parse_float(row[0], "moments")?);
        t.moment_x.push(parse_float(row[1], "moments")?);
        t.se_x.push(parse_float(row[2], "moments")?);
        t.moment_y.push(parse_float(row[3], "moments")?);
        t.se_y.push(parse_float(row[4], "moments")?);
    }
    Ok(t)
}

/// One step size per row: `delta,error,stderr`.
pub fn render_strong_error_csv(rep: &StrongErrorReport) -> String {
    let mut out = String::from("delta,error,stderr\n");
    for k in 0..rep.deltas.len() {
        out.push_str(&format_float(rep.deltas[k]));
        out.push(',');
        out.push_str(&format_float(rep.errors[k]));
        out.push(',');
        out.push_str(&format_float(rep.stderrs[k]));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorTable {
    pub deltas: Vec<f64>,
    pub errors: Vec<f64>,
    pub stderrs: Vec<f64>,
}

pub fn parse_strong_error_csv(content: &str) -> Result<StrongErrorTable> {
    let rows = rows(content, "delta,error,stderr")?;
    let mut t = StrongErrorTable {
        deltas: Vec::new(),
        errors: Vec::new(),
        stderrs: Vec::new(),
    };
    for row in rows {
        t.deltas.push(parse_float(row[0], "strong error")?);
        t.errors.push(parse_float(row[1], "strong error")?);
        t.stderrs.push(parse_float(row[2], "strong error")?);
    }
    Ok(t)
}

/// Single row `price,stderr,n_paths,knockout_fraction`.
pub fn render_price_csv(rep: &PriceReport) -> String {
    format!(
        "price,stderr,n_paths,knockout_fraction\n{},{},{},{}\n",
        format_float(rep.price),
        format_float(rep.stderr),
        rep.n_paths,
        format_float(rep.knockout_fraction),
    )
}

pub fn parse_price_csv(content: &str) -> Result<PriceReport> {
    let rows = rows(content, "price,stderr,n_paths,knockout_fraction")?;
    if rows.len() != 1 {
        return Err(Error::Report(format!(
            "price table must have exactly one row, found {}",
            rows.len()
        )));
    }
    Ok(PriceReport {
        price: parse_float(rows[0][0], "price")?,
        stderr: parse_float(rows[0][1], "price")?,
        n_paths: parse_count(rows[0][2], "price")?,
        knockout_fraction: parse_float(rows[0][3], "price")?,
    })
}
