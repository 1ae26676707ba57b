use std::fmt::Write as _;
use std::path::Path;

use crate::error::{DriftlabError, Result};

const WIDTH: f64 = 640.0;
const MARGIN: f64 = 150.0;
const AXIS_Y: f64 = 70.0;
const ROW_GAP: f64 = 22.0;

/// Groups of algorithms whose average ranks lie within `cd` of each other.
///
/// Returns maximal `(first, last)` spans over the rank-sorted order, as
/// indices into that order. Single algorithms are not groups.
pub fn cd_groups(sorted_ranks: &[f64], cd: f64) -> Vec<(usize, usize)> {
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for i in 0..sorted_ranks.len() {
        let mut j = i;
        while j + 1 < sorted_ranks.len() && sorted_ranks[j + 1] - sorted_ranks[i] <= cd {
            j += 1;
        }
        if j > i && groups.last().is_none_or(|&(_, end)| j > end) {
            groups.push((i, j));
        }
    }
    groups
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders a critical-difference diagram as a standalone SVG document.
pub fn render_cd_diagram(avg_ranks: &[f64], names: &[String], cd: f64) -> Result<String> {
    if avg_ranks.len() != names.len() {
        return Err(DriftlabError::DimensionMismatch {
            expected: avg_ranks.len(),
            found: names.len(),
        });
    }
    if avg_ranks.is_empty() || avg_ranks.iter().any(|r| !r.is_finite()) || !cd.is_finite() {
        return Err(DriftlabError::InvalidArgument("CD diagram needs finite ranks".into()));
    }
    let a = avg_ranks.len();
    let mut order: Vec<usize> = (0..a).collect();
    order.sort_by(|&x, &y| avg_ranks[x].total_cmp(&avg_ranks[y]));
    let sorted: Vec<f64> = order.iter().map(|&i| avg_ranks[i]).collect();
    let groups = cd_groups(&sorted, cd);

    let span = (a.max(2) - 1) as f64;
    let x_of = |r: f64| MARGIN + (r - 1.0) / span * (WIDTH - 2.0 * MARGIN);
    let left = a.div_ceil(2);
    let label_rows = left.max(a - left);
    let groups_y = AXIS_Y + 14.0;
    let labels_y = groups_y + 10.0 * groups.len() as f64 + 16.0;
    let height = labels_y + ROW_GAP * label_rows as f64 + 10.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height:.1}" viewBox="0 0 {WIDTH} {height:.1}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // Critical difference scale bar.
    let cd_px = cd / span * (WIDTH - 2.0 * MARGIN);
    let _ = writeln!(
        s,
        r#"<g class="cd"><line x1="{:.2}" y1="20" x2="{:.2}" y2="20" stroke="black" stroke-width="1.5"/><text x="{:.2}" y="14" text-anchor="middle">CD = {cd:.3}</text></g>"#,
        x_of(1.0),
        x_of(1.0) + cd_px,
        x_of(1.0) + cd_px / 2.0
    );

    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{:.2}" y1="{AXIS_Y}" x2="{:.2}" y2="{AXIS_Y}" stroke="black"/>"#,
        x_of(1.0),
        x_of(a.max(2) as f64)
    );
    for t in 1..=a.max(2) {
        let x = x_of(t as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.1}" x2="{x:.2}" y2="{AXIS_Y}" stroke="black"/><text x="{x:.2}" y="{:.1}" text-anchor="middle">{t}</text>"#,
            AXIS_Y - 6.0,
            AXIS_Y - 10.0
        );
    }

    for (g, &(i, j)) in groups.iter().enumerate() {
        let y = groups_y + 10.0 * g as f64;
        let _ = writeln!(
            s,
            r#"<line class="group" x1="{:.2}" y1="{y:.1}" x2="{:.2}" y2="{y:.1}" stroke="black" stroke-width="4"/>"#,
            x_of(sorted[i]) - 3.0,
            x_of(sorted[j]) + 3.0
        );
    }

    for (pos, &alg) in order.iter().enumerate() {
        let r = avg_ranks[alg];
        let x = x_of(r);
        let (row, anchor, tx) = if pos < left {
            (pos, "end", MARGIN - 10.0)
        } else {
            (a - 1 - pos, "start", WIDTH - MARGIN + 10.0)
        };
        let y = labels_y + ROW_GAP * row as f64;
        let _ = writeln!(
            s,
            r#"<g class="algorithm"><polyline points="{x:.2},{AXIS_Y} {x:.2},{y:.1} {tx:.2},{y:.1}" fill="none" stroke="black"/><text x="{:.2}" y="{:.1}" text-anchor="{anchor}">{} ({r:.2})</text></g>"#,
            if anchor == "end" { tx - 4.0 } else { tx + 4.0 },
            y + 4.0,
            escape(&names[alg])
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_cd_diagram(avg_ranks: &[f64], names: &[String], cd: f64, path: impl AsRef<Path>) -> Result<()> {
    let svg = render_cd_diagram(avg_ranks, names, cd)?;
    let path = path.as_ref();
    std::fs::write(path, svg).map_err(|e| DriftlabError::io(path, e))
}
