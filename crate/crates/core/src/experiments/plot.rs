//! Static SVG line plots of sweep means, one per scenario and metric.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::sweep::{Scenario, SweepMean, SweepResult};
use crate::aggregate::MethodVariant;
use crate::error::{Result, SleError};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;

type Metric = (&'static str, fn(&SweepMean) -> f64);

fn colour(method: MethodVariant) -> &'static str {
    match method {
        MethodVariant::MajorityVote => "#d62728",
        MethodVariant::SoftVote => "#1f77b4",
        MethodVariant::SleFusion => "#2ca02c",
    }
}

/// Renders one metric for one scenario.
pub fn render_svg(result: &SweepResult, scenario: Scenario, metric: &str, value: fn(&SweepMean) -> f64) -> String {
    let means: Vec<&SweepMean> = result.means.iter().filter(|m| m.scenario == scenario).collect();
    let (x_min, x_max) = means
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m.level), hi.max(m.level)));
    let span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let px = |x: f64| MARGIN + (x - x_min) / span * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}: {}</text>"#,
        WIDTH / 2.0,
        scenario.name(),
        metric
    );
    for tick in 0..=4 {
        let y = tick as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#ddd"/><text x="{2:.1}" y="{3:.1}" text-anchor="end">{y:.2}</text>"##,
            py(y),
            WIDTH - MARGIN,
            MARGIN - 4.0,
            py(y) + 4.0
        );
    }
    let mut levels: Vec<f64> = means.iter().map(|m| m.level).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    for l in &levels {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{l:.2}</text>"#,
            px(*l),
            HEIGHT - MARGIN + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">uncertainty level</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0
    );

    let mut legend_y = MARGIN;
    for method in MethodVariant::ALL {
        for filtered in [false, true] {
            let mut series: Vec<&&SweepMean> = means.iter().filter(|m| m.method == method && m.filtered == filtered).collect();
            if series.is_empty() {
                continue;
            }
            series.sort_by(|a, b| a.level.total_cmp(&b.level));
            let points: Vec<String> = series.iter().map(|m| format!("{:.1},{:.1}", px(m.level), py(value(m)))).collect();
            let dash = if filtered { r#" stroke-dasharray="5,3""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                colour(method),
                points.join(" ")
            );
            let name = format!("{}{}", method.name(), if filtered { " (filtered)" } else { "" });
            let _ = writeln!(
                svg,
                r#"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="{3}" stroke-width="1.5"{dash}/><text x="{4:.1}" y="{5:.1}">{name}</text>"#,
                WIDTH - MARGIN - 90.0,
                legend_y,
                WIDTH - MARGIN - 70.0,
                colour(method),
                WIDTH - MARGIN - 66.0,
                legend_y + 4.0
            );
            legend_y += 14.0;
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `<scenario>_<metric>.svg` for F1, JSD and NES.
pub fn write_plots(dir: &Path, result: &SweepResult) -> Result<()> {
    let metrics: [Metric; 3] = [("f1", |m| m.f1), ("jsd", |m| m.jsd), ("nes", |m| m.nes)];
    let mut scenarios: Vec<Scenario> = result.means.iter().map(|m| m.scenario).collect();
    scenarios.dedup();
    for scenario in scenarios {
        for (name, value) in metrics {
            let path = dir.join(format!("{}_{name}.svg", scenario.name()));
            fs::write(&path, render_svg(result, scenario, name, value)).map_err(|e| SleError::io(&path, e))?;
        }
    }
    Ok(())
}
