//! Heatmaps of grid sweeps: one image per arm length, ratio down the rows,
//! pitch across the columns, darker meaning more collisions.

use std::path::{Path, PathBuf};

use fieldsim_core::sweep::{fmt_sig, min_max_normalize, Method, SweepRecord};
use image::{Rgb, RgbImage};

const CELL: u32 = 24;
const LIGHT: [f64; 3] = [255.0, 250.0, 235.0];
const DARK: [f64; 3] = [45.0, 10.0, 70.0];

fn arm_label(arm: f64) -> String {
    let s = format!("{arm:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn shade(v: f64) -> Rgb<u8> {
    let c = |k: usize| (LIGHT[k] + (DARK[k] - LIGHT[k]) * v).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Writes `heatmap_<method>_arm<mm>.png` and a matching `.csv` grid for every
/// arm length among `records` of `method`. The color scale is min-max over
/// all of them. Returns the written paths.
pub fn write_heatmaps(dir: &Path, records: &[SweepRecord], method: Method) -> std::io::Result<Vec<PathBuf>> {
    let rows: Vec<&SweepRecord> = records.iter().filter(|r| r.method == method).collect();
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir)?;
    let scaled = min_max_normalize(&rows.iter().map(|r| r.probability).collect::<Vec<_>>());
    let mut written = Vec::new();
    for arm in distinct(rows.iter().map(|r| r.point.arm).collect()) {
        let slice: Vec<usize> = (0..rows.len()).filter(|&k| rows[k].point.arm == arm).collect();
        let ratios = distinct(slice.iter().map(|&k| rows[k].point.ratio).collect());
        let pitches = distinct(slice.iter().map(|&k| rows[k].point.pitch).collect());
        let mut img = RgbImage::from_pixel(pitches.len() as u32 * CELL, ratios.len() as u32 * CELL, Rgb([255, 255, 255]));
        let mut grid = vec![vec![None; pitches.len()]; ratios.len()];
        for &k in &slice {
            let i = ratios.iter().position(|&v| v == rows[k].point.ratio).unwrap();
            let j = pitches.iter().position(|&v| v == rows[k].point.pitch).unwrap();
            grid[i][j] = Some(rows[k].probability);
            for y in 0..CELL {
                for x in 0..CELL {
                    img.put_pixel(j as u32 * CELL + x, i as u32 * CELL + y, shade(scaled[k]));
                }
            }
        }
        let stem = format!("heatmap_{}_arm{}", method, arm_label(arm));
        let png = dir.join(format!("{stem}.png"));
        img.save(&png).map_err(std::io::Error::other)?;
        let mut csv = String::from("ratio\\pitch_mm");
        for p in &pitches {
            csv.push(',');
            csv.push_str(&fmt_sig(*p, 15));
        }
        csv.push('\n');
        for (i, r) in ratios.iter().enumerate() {
            csv.push_str(&fmt_sig(*r, 15));
            for cell in &grid[i] {
                csv.push(',');
                if let Some(v) = cell {
                    csv.push_str(&fmt_sig(*v, 15));
                }
            }
            csv.push('\n');
        }
        let grid_path = dir.join(format!("{stem}.csv"));
        std::fs::write(&grid_path, csv)?;
        written.push(png);
        written.push(grid_path);
    }
    Ok(written)
}
