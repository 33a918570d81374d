use std::fmt::Write as _;

use super::AggregateRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// Line chart of the mean of every policy against the checkpoint, with a
/// shaded band of two standard errors.
pub fn render_svg(rows: &[AggregateRow], y_label: &str) -> String {
    let mut policies: Vec<&str> = Vec::new();
    for r in rows {
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
    }
    let x_max = rows.iter().map(|r| r.checkpoint_t).max().unwrap_or(1).max(1) as f64;
    let y_max = rows.iter().map(|r| r.mean + 2.0 * r.se).fold(0.0, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let x = |t: f64| MARGIN + t / x_max * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - v / y_max * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (x(0.0), y(0.0), x(x_max), y(y_max));
    let _ = writeln!(svg, r#"<path d="M{x0:.1} {y1:.1} V{y0:.1} H{x1:.1}" stroke="black" fill="none"/>"#);
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let (tx, ty) = (x(frac * x_max), y(frac * y_max));
        let _ = writeln!(
            svg,
            r#"<text x="{tx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 16.0,
            (frac * x_max).round()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            x0 - 4.0,
            ty + 4.0,
            frac * y_max
        );
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (i, name) in policies.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<&AggregateRow> = rows.iter().filter(|r| r.policy == *name).collect();
        let upper = pts.iter().map(|r| format!("{:.1},{:.1}", x(r.checkpoint_t as f64), y(r.mean + 2.0 * r.se)));
        let lower = pts
            .iter()
            .rev()
            .map(|r| format!("{:.1},{:.1}", x(r.checkpoint_t as f64), y((r.mean - 2.0 * r.se).max(0.0))));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ =
            writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> =
            pts.iter().map(|r| format!("{:.1},{:.1}", x(r.checkpoint_t as f64), y(r.mean))).collect();
        let _ =
            writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            x0 + 10.0,
            x0 + 30.0
        );
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{name}</text>"#, x0 + 36.0, ly + 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_line_per_policy() {
        let row = |policy: &str, t, mean| AggregateRow {
            policy: policy.into(),
            checkpoint_t: t,
            mean,
            sd: 1.0,
            se: 0.1,
            runs: 100,
        };
        let rows = vec![row("a", 10, 1.0), row("a", 20, 2.0), row("b", 10, 0.5), row("b", 20, 0.7)];
        let svg = render_svg(&rows, "regret");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(render_svg(&[], "regret").contains("</svg>"));
    }
}
