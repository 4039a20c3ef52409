//! CSV and plain-text renderings of a result table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::ResultTable;
use crate::error::{invalid, Result};

/// `mean ± rmse` as percentages with two decimals.
pub fn format_cell(mean: f64, rmse: f64) -> String {
    format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * rmse)
}

fn check(table: &ResultTable) -> Result<usize> {
    if table.rows.is_empty() {
        return Err(invalid("result table is empty"));
    }
    Ok(table.rows.iter().map(|r| r.per_run.len()).max().unwrap_or(0))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One line per row: protocol coordinates, mean, rmse, then every run.
/// Timings are left out so identical experiments give identical files.
pub fn render_csv(table: &ResultTable) -> Result<String> {
    let runs = check(table)?;
    let mut out = String::from("network,variant,train_per_class,occlusion,blocks,mean,rmse");
    for r in 1..=runs {
        write!(out, ",run_{r}").unwrap();
    }
    out.push_str(",error\n");
    for row in &table.rows {
        let p = &row.point;
        let i = p.train_per_class.map_or(String::new(), |i| i.to_string());
        let q = p.occlusion.map_or(String::new(), |q| q.to_string());
        write!(out, "{},{},{i},{q},{}", csv_field(&row.network), row.variant, p.blocks).unwrap();
        if row.error.is_some() {
            out.push_str(",,");
        } else {
            write!(out, ",{},{}", row.mean, row.rmse).unwrap();
        }
        for r in 0..runs {
            out.push(',');
            if let Some(v) = row.per_run.get(r) {
                write!(out, "{v}").unwrap();
            }
        }
        writeln!(out, ",{}", csv_field(row.error.as_deref().unwrap_or(""))).unwrap();
    }
    Ok(out)
}

fn pad(s: &str, width: usize) -> String {
    let n = s.chars().count();
    format!("{s}{}", " ".repeat(width.saturating_sub(n)))
}

/// Networks down, protocol points across, `mean ± rmse` cells.
pub fn render_text(table: &ResultTable) -> Result<String> {
    check(table)?;
    let mut networks: Vec<&str> = Vec::new();
    let mut points: Vec<String> = Vec::new();
    for row in &table.rows {
        if !networks.contains(&row.network.as_str()) {
            networks.push(&row.network);
        }
        let p = row.point.to_string();
        if !points.contains(&p) {
            points.push(p);
        }
    }
    let mut grid = vec![vec![String::from("-"); points.len()]; networks.len()];
    for row in &table.rows {
        let n = networks.iter().position(|&x| x == row.network).unwrap();
        let p = points.iter().position(|x| *x == row.point.to_string()).unwrap();
        grid[n][p] = match &row.error {
            Some(_) => "error".to_string(),
            None => format_cell(row.mean, row.rmse),
        };
    }
    let first = networks.iter().map(|s| s.chars().count()).max().unwrap().max("network".len());
    let widths: Vec<usize> = (0..points.len())
        .map(|p| grid.iter().map(|r| r[p].chars().count()).max().unwrap().max(points[p].chars().count()))
        .collect();
    let mut out = pad("network", first);
    for (p, w) in points.iter().zip(&widths) {
        out.push_str("  ");
        out.push_str(&pad(p, *w));
    }
    let mut out = out.trim_end().to_string();
    out.push('\n');
    for (n, name) in networks.iter().enumerate() {
        let mut line = pad(name, first);
        for (cell, w) in grid[n].iter().zip(&widths) {
            line.push_str("  ");
            line.push_str(&pad(cell, *w));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    for row in table.rows.iter().filter(|r| r.error.is_some()) {
        writeln!(out, "error: {} {}: {}", row.network, row.point, row.error.as_deref().unwrap()).unwrap();
    }
    Ok(out)
}

/// Writes `results.csv` and `results.txt` under `dir`, creating it if needed.
pub fn emit_results(table: &ResultTable, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv = render_csv(table)?;
    let text = render_text(table)?;
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("results.csv");
    let text_path = dir.join("results.txt");
    std::fs::write(&csv_path, csv)?;
    std::fs::write(&text_path, text)?;
    Ok((csv_path, text_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{mean_and_rmse, ProtocolPoint, ResultRow};
    use crate::network::{BlockGrid, Variant};

    fn row(variant: Variant, q: Option<f64>, runs: &[f64]) -> ResultRow {
        let (mean, rmse) = mean_and_rmse(runs);
        ResultRow {
            network: variant.to_string(),
            variant,
            point: ProtocolPoint { train_per_class: Some(2), occlusion: q, blocks: BlockGrid::new(4, 2).unwrap() },
            mean,
            rmse,
            per_run: runs.to_vec(),
            wall_time_secs: 1.5,
            error: None,
        }
    }

    #[test]
    fn cell_format() {
        assert_eq!(format_cell(0.996_666_666, 0.000_9), "99.67 ± 0.09");
        assert_eq!(format_cell(0.9, 0.1), "90.00 ± 10.00");
    }

    #[test]
    fn single_row_csv() {
        let t = ResultTable { rows: vec![row(Variant::PcaNet, None, &[0.8, 1.0])] };
        let csv = render_csv(&t).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "network,variant,train_per_class,occlusion,blocks,mean,rmse,run_1,run_2,error");
        assert_eq!(lines[1], "PCANet,PCANet,2,,4x2,0.9,0.09999999999999998,0.8,1,");
    }

    #[test]
    fn empty_table_is_an_error() {
        let t = ResultTable::default();
        assert!(render_csv(&t).is_err());
        assert!(render_text(&t).is_err());
        assert!(emit_results(&t, Path::new("/nonexistent")).is_err());
    }

    #[test]
    fn text_table_is_aligned() {
        let t = ResultTable {
            rows: vec![
                row(Variant::PcaNet, Some(0.1), &[0.5, 0.7]),
                row(Variant::PcaNet, Some(0.3), &[0.4, 0.4]),
                row(Variant::L1TwoDSquaredPcaNet, Some(0.1), &[1.0, 1.0]),
            ],
        };
        let text = render_text(&t).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("network"));
        assert!(lines[1].contains("60.00 ± 10.00") && lines[1].contains("40.00 ± 0.00"));
        assert!(lines[2].contains("100.00 ± 0.00") && lines[2].trim_end().ends_with('-'));
        let col = |l: &str| l.chars().position(|c| c == '±');
        assert_eq!(col(lines[1]).unwrap() + 1, col(lines[2]).unwrap());
    }

    #[test]
    fn writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let t = ResultTable { rows: vec![row(Variant::TwoDPcaNet, None, &[1.0])] };
        let (c, x) = emit_results(&t, &dir.path().join("out")).unwrap();
        assert!(std::fs::read_to_string(c).unwrap().contains("2DPCANet"));
        assert!(std::fs::read_to_string(x).unwrap().contains("100.00 ± 0.00"));
    }
}
