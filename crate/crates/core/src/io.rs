//! CSV formats shared by the library and the CLI.
//!
//! Curve files hold one abscissa column `t` followed by one column per curve,
//! with a header row of curve identifiers; readers reject non-increasing `t`.
//! All floating-point output is printed with 17 significant digits so values
//! round-trip exactly.

use std::io::Write;
use std::path::Path;

use crate::curves::{Curve, Element, Grid};
use crate::error::{Error, Result};
use crate::ratebench::ExperimentResult;

/// 17 significant digits: enough to reconstruct any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(field: &str, context: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Data {
        context: context.to_string(),
        message: format!("`{field}` is not a number"),
    })
}

// ---------------------------------------------------------------------------
// Curve files
// ---------------------------------------------------------------------------

/// Read a curve file: returns the grid, the curves, and their header names.
pub fn read_curves_csv(path: &Path) -> Result<(Grid, Vec<Curve>, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Data {
            context: path.display().to_string(),
            message: "curve files need a `t` column and at least one curve column".into(),
        });
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut t = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for record in reader.records() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Data {
                context: path.display().to_string(),
                message: format!(
                    "row has {} fields, header has {}",
                    record.len(),
                    headers.len()
                ),
            });
        }
        t.push(parse_f64(&record[0], "t column")?);
        for (j, column) in columns.iter_mut().enumerate() {
            column.push(parse_f64(&record[j + 1], &format!("column {}", names[j]))?);
        }
    }
    let grid = Grid::new(t)?;
    let curves = columns
        .into_iter()
        .map(|values| Curve::new(grid.clone(), values))
        .collect::<Result<_>>()?;
    Ok((grid, curves, names))
}

/// Write curves sharing one grid to a curve file.
pub fn write_curves_csv(path: &Path, curves: &[Curve], names: &[String]) -> Result<()> {
    if curves.is_empty() {
        return Err(Error::EmptySamples);
    }
    if names.len() != curves.len() {
        return Err(Error::Data {
            context: path.display().to_string(),
            message: format!("{} names for {} curves", names.len(), curves.len()),
        });
    }
    let grid = curves[0].grid();
    for c in curves {
        if !c.grid().same_as(grid) {
            return Err(Error::GridMismatch {
                left: grid.len(),
                right: c.grid().len(),
            });
        }
    }
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend_from_slice(names);
    writer.write_record(&header)?;
    for (i, &t) in grid.points().iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        row.extend(curves.iter().map(|c| fmt_f64(c.values()[i])));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Sample files (one column of reals)
// ---------------------------------------------------------------------------

/// Read a single-column sample file; a non-numeric first line is treated as a
/// header and skipped.
pub fn read_samples_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => samples.push(v),
            Err(_) if i == 0 => continue, // header
            Err(_) => {
                return Err(Error::Data {
                    context: path.display().to_string(),
                    message: format!("line {}: `{field}` is not a number", i + 1),
                })
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(samples)
}

// ---------------------------------------------------------------------------
// Element sequences
// ---------------------------------------------------------------------------

/// Write a generated sequence. Scalars become `(i, value)` rows, vectors
/// `(i, x1..xd)` rows, and curve sequences use the curve file layout with one
/// column per sample.
pub fn write_elements_csv(path: &Path, elements: &[Element], label: &str) -> Result<()> {
    if elements.is_empty() {
        return Err(Error::EmptySamples);
    }
    match &elements[0] {
        Element::Curve(_) => {
            let curves: Vec<Curve> = elements
                .iter()
                .map(|e| match e {
                    Element::Curve(c) => Ok(c.clone()),
                    other => Err(Error::SpaceMismatch {
                        expected: "curve".into(),
                        found: other.space().to_string(),
                    }),
                })
                .collect::<Result<_>>()?;
            let names: Vec<String> = (1..=curves.len()).map(|i| format!("{label}{i}")).collect();
            write_curves_csv(path, &curves, &names)
        }
        Element::Scalar(_) => {
            let mut writer = csv::Writer::from_path(path)?;
            writer.write_record(["i", label])?;
            for (i, e) in elements.iter().enumerate() {
                let Element::Scalar(v) = e else {
                    return Err(Error::SpaceMismatch {
                        expected: "scalar".into(),
                        found: e.space().to_string(),
                    });
                };
                writer.write_record([(i + 1).to_string(), fmt_f64(*v)])?;
            }
            writer.flush()?;
            Ok(())
        }
        Element::Vector(first) => {
            let dim = first.len();
            let mut writer = csv::Writer::from_path(path)?;
            let mut header = vec!["i".to_string()];
            header.extend((1..=dim).map(|j| format!("{label}{j}")));
            writer.write_record(&header)?;
            for (i, e) in elements.iter().enumerate() {
                let Element::Vector(v) = e else {
                    return Err(Error::SpaceMismatch {
                        expected: format!("vector({dim})"),
                        found: e.space().to_string(),
                    });
                };
                let mut row = vec![(i + 1).to_string()];
                row.extend(v.iter().map(|&x| fmt_f64(x)));
                writer.write_record(&row)?;
            }
            writer.flush()?;
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Experiment outputs
// ---------------------------------------------------------------------------

/// Raw per-replication records: `n, replication, error, H, k_eff, v_n1, c_n2`.
pub fn write_experiment_raw(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["n", "replication", "error", "H", "k_eff", "v_n1", "c_n2"])?;
    for r in &result.records {
        writer.write_record([
            r.n.to_string(),
            r.replication.to_string(),
            fmt_f64(r.error),
            fmt_f64(r.radius),
            r.k_effective.to_string(),
            fmt_f64(r.v_n1),
            fmt_f64(r.c_n2),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-n summary: `n, median, q90`.
pub fn write_experiment_summary(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["n", "median", "q90"])?;
    for s in &result.summaries {
        writer.write_record([s.n.to_string(), fmt_f64(s.median), fmt_f64(s.q90)])?;
    }
    writer.flush()?;
    Ok(())
}

/// Small-ball curve: `h, phi_hat`.
pub fn write_phi_csv(path: &Path, curve: &crate::smallball::SmallBallCurve) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["h", "phi_hat"])?;
    for (h, p) in curve.h_grid.iter().zip(&curve.phi_hat) {
        writer.write_record([fmt_f64(*h), fmt_f64(*p)])?;
    }
    writer.flush()?;
    Ok(())
}

/// Concentration check outcomes: `replication, statistic, violated`.
pub fn write_check_csv(path: &Path, result: &crate::smallball::CheckResult) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["replication", "statistic", "violated"])?;
    for (i, o) in result.per_replication.iter().enumerate() {
        writer.write_record([
            i.to_string(),
            fmt_f64(o.statistic),
            (o.violated as u8).to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Write text to a file, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}
