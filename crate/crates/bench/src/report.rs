use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{BenchError, Result};
use crate::grid::{average_by, GridCellResult};
use crate::measure::BenchRecord;

pub const GRID_CSV: &str = "grid.csv";
pub const GRID_AVERAGE_CSV: &str = "grid_average.csv";
pub const GRID_TIMING_CSV: &str = "grid_timing.csv";
pub const SIZES_CSV: &str = "sizes.csv";
pub const TIMES_CSV: &str = "times.csv";
pub const SUMMARY_MD: &str = "report.md";

fn num(v: f64) -> String {
    format!("{v:.4}")
}

fn lr(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(BenchError::io(path))?;
    Ok(())
}

fn md_table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

/// Writes one CSV per table plus a Markdown summary into `out_dir`.
///
/// The output is a pure function of the inputs. Cell wall times go to a
/// separate file so `grid.csv` is reproducible across runs.
pub fn emit_report(results: &[GridCellResult], records: &[BenchRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(BenchError::io(out_dir))?;
    let grid_header = ["id", "seed", "lr", "L", "loss", "psnr_db", "diverged"];
    let grid_rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.id.to_string(),
                r.seed.to_string(),
                lr(r.lr),
                r.n_freqs.to_string(),
                num(r.loss),
                num(r.psnr_db),
                r.diverged.to_string(),
            ]
        })
        .collect();
    let avg_header = ["lr", "L", "cells", "diverged", "loss", "psnr_db", "mean_psnr_db"];
    let avg_rows: Vec<Vec<String>> = average_by(results)
        .iter()
        .map(|a| {
            vec![
                lr(a.lr),
                a.n_freqs.to_string(),
                a.cells.to_string(),
                a.diverged.to_string(),
                num(a.loss),
                num(a.psnr_db),
                num(a.mean_psnr_db),
            ]
        })
        .collect();
    let timing_header = ["id", "wall_time_s"];
    let timing_rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| vec![r.id.to_string(), num(r.wall_time_s)])
        .collect();
    let sizes_header = ["representation", "size_mb", "dense_size_mb"];
    let sizes_rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| vec![r.representation.name().to_string(), num(r.size_mb), opt(r.dense_size_mb)])
        .collect();
    let times_header = ["representation", "build_time_s", "steps"];
    let times_rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let steps: Vec<String> = r.steps.iter().map(|s| format!("{}={}", s.name, num(s.seconds))).collect();
            vec![r.representation.name().to_string(), num(r.build_time_s), steps.join(";")]
        })
        .collect();

    let files = [
        (GRID_CSV, &grid_header[..], &grid_rows),
        (GRID_AVERAGE_CSV, &avg_header[..], &avg_rows),
        (GRID_TIMING_CSV, &timing_header[..], &timing_rows),
        (SIZES_CSV, &sizes_header[..], &sizes_rows),
        (TIMES_CSV, &times_header[..], &times_rows),
    ];
    let mut written = Vec::new();
    for (name, header, rows) in files {
        let path = out_dir.join(name);
        write_csv(&path, header, rows)?;
        written.push(path);
    }

    let mut md = String::from("# Reconstruction benchmark\n\n## Grid search\n\n");
    md_table(&mut md, &grid_header, &grid_rows);
    md.push_str("## Grid averages by learning rate and L\n\n");
    md_table(&mut md, &avg_header, &avg_rows);
    md.push_str("## Size\n\n");
    md_table(&mut md, &sizes_header, &sizes_rows);
    md.push_str("## Build time\n\n");
    md_table(&mut md, &times_header, &times_rows);
    let quality: Vec<Vec<String>> = records
        .iter()
        .filter_map(|r| {
            r.quality.map(|q| {
                vec![
                    r.representation.name().to_string(),
                    num(q.mse),
                    num(q.psnr_db),
                    num(q.ssim),
                ]
            })
        })
        .collect();
    if !quality.is_empty() {
        md.push_str("## Held-out view quality\n\n");
        md_table(&mut md, &["representation", "mse", "psnr_db", "ssim"], &quality);
    }
    let failures: Vec<String> = records
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("- {}: {e}", r.representation.name())))
        .collect();
    if !failures.is_empty() {
        md.push_str("## Failures\n\n");
        md.push_str(&failures.join("\n"));
        md.push('\n');
    }
    let path = out_dir.join(SUMMARY_MD);
    std::fs::write(&path, md).map_err(BenchError::io(&path))?;
    written.push(path);
    Ok(written)
}
