//! Per-step table of box widths against polytope volume estimates.

use std::path::Path;

use polyfilt::filter::StepRecord;

use crate::run::{read_records, CliError};

pub fn rows(records: &[StepRecord]) -> (Vec<String>, Vec<Vec<String>>) {
    let n = records.first().map_or(0, |r| r.bounding_box.dim());
    let mut header = vec!["step".to_string()];
    header.extend((1..=n).map(|i| format!("width_x{i}")));
    header.extend(["box_volume", "polytope_volume_mc", "ratio", "halfspaces"].map(String::from));
    let body = records
        .iter()
        .map(|r| {
            let mut row = vec![r.step.to_string()];
            row.extend(r.bounding_box.widths().iter().map(|w| format!("{w:.6e}")));
            let ratio = if r.box_volume > 0.0 {
                r.polytope_volume_mc / r.box_volume
            } else {
                f64::NAN
            };
            row.push(format!("{:.6e}", r.box_volume));
            row.push(format!("{:.6e}", r.polytope_volume_mc));
            row.push(format!("{ratio:.4}"));
            row.push(r.polytope.len().to_string());
            row
        })
        .collect();
    (header, body)
}

pub fn report(out: &Path) -> Result<(), CliError> {
    let records = read_records(out)?;
    let (header, body) = rows(&records);
    let path = out.join("report.csv");
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(io)?;
    w.write_record(&header).map_err(io)?;
    for row in &body {
        w.write_record(row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;

    let widths: Vec<usize> = (0..header.len())
        .map(|j| {
            body.iter()
                .map(|r| r[j].len())
                .chain([header[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    println!("{}", line(&header));
    for row in &body {
        println!("{}", line(row));
    }
    let smaller = records
        .iter()
        .filter(|r| r.polytope_volume_mc < r.box_volume)
        .count();
    println!(
        "polytope strictly smaller than the box at {smaller}/{} steps",
        records.len()
    );
    Ok(())
}
