//! CSV tables, SVG polar heatmaps and the goal-error text table.
//!
//! Every float is written with a fixed number of decimals so output bytes
//! depend only on the computed values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::roi::KeypointStrategy;
use crate::sim::{ExperimentA, ExperimentB, Pose};

/// Upper end of the heatmap color scale, degrees.
pub const HEATMAP_MAX_DEG: f64 = 15.0;

pub const EXPERIMENT_A_COLUMNS: [&str; 6] =
    ["range_m", "bearing_deg", "direction", "strategy", "mean_err_deg", "yield"];

pub const EXPERIMENT_A_DETAIL_COLUMNS: [&str; 11] = [
    "range_m",
    "bearing_deg",
    "direction",
    "strategy",
    "frames",
    "estimates",
    "mean_err_deg",
    "mean_pitch_err_deg",
    "mean_yaw_err_deg",
    "max_err_deg",
    "mean_goal_err_m",
];

pub const EXPERIMENT_B_COLUMNS: [&str; 8] =
    ["distance_m", "mu_cm", "sigma_cm", "frames", "goals", "yield", "ref_mu_cm", "ref_sigma_cm"];

/// Fixed-decimal formatting; non-finite values become empty fields.
fn num(v: f64, decimals: usize) -> String {
    if v.is_finite() {
        // Avoid "-0.000" for tiny negatives.
        let s = format!("{v:.decimals$}");
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            s.trim_start_matches('-').to_string()
        } else {
            s
        }
    } else {
        String::new()
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// One row per (position, direction, strategy).
pub fn experiment_a_csv(exp: &ExperimentA) -> Result<String> {
    let rows = exp.cells.iter().flat_map(|cell| {
        cell.stats.iter().map(move |s| {
            vec![
                num(cell.pose.range, 2),
                num(cell.pose.bearing_deg, 2),
                cell.direction.clone(),
                s.strategy.as_str().to_string(),
                num(s.mean_error_deg(), 6),
                num(s.yield_rate(), 4),
            ]
        })
    });
    csv_string(&EXPERIMENT_A_COLUMNS, rows)
}

/// Per-cell breakdown with pitch, yaw and floor-goal errors.
pub fn experiment_a_detail_csv(exp: &ExperimentA) -> Result<String> {
    let rows = exp.cells.iter().flat_map(|cell| {
        cell.stats.iter().map(move |s| {
            vec![
                num(cell.pose.range, 2),
                num(cell.pose.bearing_deg, 2),
                cell.direction.clone(),
                s.strategy.as_str().to_string(),
                s.frames().to_string(),
                s.estimates().to_string(),
                num(s.mean_error_deg(), 6),
                num(s.mean_pitch_error_deg(), 6),
                num(s.mean_yaw_error_deg(), 6),
                num(s.max_error_deg(), 6),
                num(s.mean_goal_error_m(), 6),
            ]
        })
    });
    csv_string(&EXPERIMENT_A_DETAIL_COLUMNS, rows)
}

pub fn experiment_b_csv(exp: &ExperimentB) -> Result<String> {
    let rows = exp.rows.iter().map(|r| {
        let (ref_mu, ref_sigma) = r.reference.unwrap_or((f64::NAN, f64::NAN));
        let yld = if r.frames == 0 { f64::NAN } else { r.goals as f64 / r.frames as f64 };
        vec![
            num(r.distance, 2),
            num(r.mu_cm, 3),
            num(r.sigma_cm, 3),
            r.frames.to_string(),
            r.goals.to_string(),
            num(yld, 4),
            num(ref_mu, 1),
            num(ref_sigma, 1),
        ]
    });
    csv_string(&EXPERIMENT_B_COLUMNS, rows)
}

/// Plain-text table of goal error per distance with the hardware reference
/// alongside.
pub fn goal_table(exp: &ExperimentB) -> String {
    let dash = |s: String| if s.is_empty() { "-".to_string() } else { s };
    let mut out = String::new();
    let _ = writeln!(out, "Goal error by distance (strategy: {})", exp.strategy);
    let _ = writeln!(
        out,
        "{:>12} | {:>9} | {:>9} | {:>13} | {:>13}",
        "Distance (m)", "mu (cm)", "sigma (cm)", "ref mu (cm)", "ref sigma (cm)"
    );
    let _ = writeln!(out, "{}", "-".repeat(12 + 9 + 10 + 13 + 14 + 12));
    for r in &exp.rows {
        let (rm, rs) = r.reference.unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(
            out,
            "{:>12} | {:>9} | {:>10} | {:>13} | {:>14}",
            num(r.distance, 1),
            dash(num(r.mu_cm, 1)),
            dash(num(r.sigma_cm, 1)),
            dash(num(rm, 1)),
            dash(num(rs, 1)),
        );
    }
    out
}

/// Maps `t` in [0, 1] onto a dark-blue to yellow ramp.
fn color(t: f64) -> String {
    const STOPS: [[f64; 3]; 5] =
        [[68.0, 1.0, 84.0], [59.0, 82.0, 139.0], [33.0, 145.0, 140.0], [94.0, 201.0, 98.0], [253.0, 231.0, 37.0]];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 1.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let c: Vec<u8> = (0..3).map(|k| (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    v
}

/// Half the smallest spacing between values, or `fallback` for a single value.
fn half_step(values: &[f64], fallback: f64) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min).min(2.0 * fallback) / 2.0
}

/// Polar heatmap of mean angular error per position, camera at the bottom
/// center, radius = range in meters, angle = bearing.
pub fn heatmap_svg(exp: &ExperimentA, strategy: KeypointStrategy) -> String {
    let cells: Vec<(Pose, f64)> = exp.position_means(strategy);
    let ranges = sorted_unique(cells.iter().map(|(p, _)| p.range).collect());
    let bearings = sorted_unique(cells.iter().map(|(p, _)| p.bearing_deg).collect());
    let dr = half_step(&ranges, 0.5);
    let db = half_step(&bearings, 5.0);
    let r_max = ranges.last().copied().unwrap_or(1.0) + dr;

    let (w, h) = (640.0, 520.0);
    let (ox, oy) = (w / 2.0, 440.0);
    let scale = 380.0 / r_max;
    let at = |r: f64, b: f64| {
        let a = b.to_radians();
        (ox + scale * r * a.sin(), oy - scale * r * a.cos())
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">Mean angular error, strategy {}</text>"#,
        ox, strategy
    );
    for (pose, err) in &cells {
        let (r0, r1) = ((pose.range - dr).max(0.0), pose.range + dr);
        let (b0, b1) = (pose.bearing_deg - db, pose.bearing_deg + db);
        let p = [at(r0, b0), at(r1, b0), at(r1, b1), at(r0, b1)];
        let _ = writeln!(
            s,
            r#"<path d="M {:.2} {:.2} L {:.2} {:.2} A {:.2} {:.2} 0 0 1 {:.2} {:.2} L {:.2} {:.2} A {:.2} {:.2} 0 0 0 {:.2} {:.2} Z" fill="{}" stroke="white" stroke-width="1"><title>{} m, {} deg: {} deg</title></path>"#,
            p[0].0,
            p[0].1,
            p[1].0,
            p[1].1,
            scale * r1,
            scale * r1,
            p[2].0,
            p[2].1,
            p[3].0,
            p[3].1,
            scale * r0,
            scale * r0,
            p[0].0,
            p[0].1,
            color(err / HEATMAP_MAX_DEG),
            num(pose.range, 2),
            num(pose.bearing_deg, 2),
            num(*err, 3),
        );
    }
    for r in &ranges {
        let (x, y) = at(*r, bearings.last().copied().unwrap_or(0.0) + db);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{} m</text>"#,
            x + 4.0,
            y,
            num(*r, 1)
        );
    }
    for b in &bearings {
        let (x, y) = at(r_max + 14.0 / scale, *b);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{} deg</text>"#,
            num(*b, 1)
        );
    }
    let _ = writeln!(s, r#"<circle cx="{ox}" cy="{oy}" r="4" fill="black"/>"#);

    let (bx, by, bw) = (120.0, 480.0, 400.0);
    for i in 0..50 {
        let t = i as f64 / 49.0;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{by}" width="{:.2}" height="12" fill="{}"/>"#,
            bx + bw * i as f64 / 50.0,
            bw / 50.0 + 0.5,
            color(t)
        );
    }
    for k in [0.0, 5.0, 10.0, 15.0] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{k}</text>"#,
            bx + bw * k / HEATMAP_MAX_DEG,
            by + 26.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">deg</text>"#,
        bx + bw + 8.0,
        by + 11.0
    );
    s.push_str("</svg>\n");
    s
}

fn write(dir: &Path, name: &str, contents: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    out.push(path);
    Ok(())
}

/// Writes the summary and detail CSVs plus one heatmap per strategy.
pub fn write_experiment_a(dir: &Path, exp: &ExperimentA) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    write(dir, "experiment_a.csv", &experiment_a_csv(exp)?, &mut out)?;
    write(dir, "experiment_a_detail.csv", &experiment_a_detail_csv(exp)?, &mut out)?;
    for &s in &exp.strategies {
        write(dir, &format!("heatmap_{}.svg", s.as_str()), &heatmap_svg(exp, s), &mut out)?;
    }
    Ok(out)
}

/// Writes the goal CSV and text table.
pub fn write_experiment_b(dir: &Path, exp: &ExperimentB) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    write(dir, "experiment_b.csv", &experiment_b_csv(exp)?, &mut out)?;
    write(dir, "goal_table.txt", &goal_table(exp), &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraIntrinsics;
    use crate::roi::RoiParams;
    use crate::sim::{run_experiment_a, run_experiment_b, Scenario};

    fn scenario() -> Scenario {
        let mut s = Scenario { frames_per_pose: 4, ..Scenario::default() };
        s.grid.ranges = vec![1.5, 3.5];
        s.grid.bearings_deg = vec![-7.5, 7.5];
        s.floor.distances = vec![1.5, 2.0];
        s
    }

    #[test]
    fn number_format() {
        assert_eq!(num(1.5, 2), "1.50");
        assert_eq!(num(-0.0000001, 3), "0.000");
        assert_eq!(num(-2.25, 1), "-2.2");
        assert_eq!(num(f64::NAN, 3), "");
    }

    #[test]
    fn color_ramp_ends() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(7.0), "#fde725");
        assert_eq!(color(f64::NAN), "#fde725");
    }

    #[test]
    fn summary_csv_shape() {
        let exp = run_experiment_a(
            &scenario(),
            &CameraIntrinsics::default(),
            &KeypointStrategy::ALL,
            &RoiParams::default(),
            false,
        )
        .unwrap();
        let csv = experiment_a_csv(&exp).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "range_m,bearing_deg,direction,strategy,mean_err_deg,yield");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 2 * 2 * 4 * 4);
        assert!(rows.iter().all(|r| r.split(',').count() == 6));
        assert!(rows[0].starts_with("1.50,-7.50,away,mean,"));
        let detail = experiment_a_detail_csv(&exp).unwrap();
        assert!(detail.lines().skip(1).all(|r| r.split(',').count() == EXPERIMENT_A_DETAIL_COLUMNS.len()));
    }

    #[test]
    fn heatmap_has_one_sector_per_position() {
        let exp = run_experiment_a(
            &scenario(),
            &CameraIntrinsics::default(),
            &[KeypointStrategy::MeanDepth],
            &RoiParams::default(),
            false,
        )
        .unwrap();
        let svg = heatmap_svg(&exp, KeypointStrategy::MeanDepth);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path ").count(), 4);
    }

    #[test]
    fn goal_outputs() {
        let exp = run_experiment_b(
            &scenario(),
            &CameraIntrinsics::default(),
            KeypointStrategy::MeanDepth,
            &RoiParams::default(),
            false,
        )
        .unwrap();
        let csv = experiment_b_csv(&exp).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "distance_m,mu_cm,sigma_cm,frames,goals,yield,ref_mu_cm,ref_sigma_cm");
        assert!(lines[1].starts_with("1.50,") && lines[1].ends_with(",16.1,1.9"));
        assert!(lines[2].ends_with(",,"));
        let table = goal_table(&exp);
        assert!(table.contains("16.1") && table.lines().count() == 5);
    }

    #[test]
    fn writes_files() {
        let dir = std::env::temp_dir().join(format!("pointing-report-{}", std::process::id()));
        let exp = run_experiment_b(
            &scenario(),
            &CameraIntrinsics::default(),
            KeypointStrategy::MeanDepth,
            &RoiParams::default(),
            false,
        )
        .unwrap();
        let files = write_experiment_b(&dir, &exp).unwrap();
        assert_eq!(files.len(), 2);
        assert!(files.iter().all(|f| f.exists()));
        let _ = fs::remove_dir_all(&dir);
    }
}
