//! Four-axis radar chart SVG, one polygon per model.

use crate::scoring::DimensionScores;

const SIZE: f64 = 340.0;
const CX: f64 = 170.0;
const CY: f64 = 175.0;
const RADIUS: f64 = 110.0;

const COLORS: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

/// Axis order and angles: Explainability up, Fairness right, Sustainability
/// down, Robustness left.
fn axis_point(axis: usize, r: f64) -> (f64, f64) {
    let (dx, dy) = match axis {
        0 => (0.0, -1.0),
        1 => (1.0, 0.0),
        2 => (0.0, 1.0),
        _ => (-1.0, 0.0),
    };
    (CX + dx * r, CY + dy * r)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Self-contained SVG: unit grid rings at 0.25 steps, labeled axes, one
/// polygon per (model, scores) entry, and a legend.
pub fn radar_svg(dataset: &str, entries: &[(String, DimensionScores)]) -> String {
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SIZE} {SIZE}\" \
         width=\"{SIZE}\" height=\"{SIZE}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!(
        "  <title>{} responsibility profile</title>\n",
        xml_escape(dataset)
    ));
    svg.push_str(&format!(
        "  <text x=\"{CX}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        xml_escape(dataset)
    ));

    // grid rings at 0.25 steps
    for step in 1..=4 {
        let r = RADIUS * step as f64 / 4.0;
        svg.push_str(&format!(
            "  <circle cx=\"{CX}\" cy=\"{CY}\" r=\"{r:.3}\" fill=\"none\" \
             stroke=\"#cccccc\" stroke-width=\"1\"/>\n"
        ));
    }
    // axes and labels
    let labels = ["Explainability", "Fairness", "Sustainability", "Robustness"];
    for (axis, label) in labels.iter().enumerate() {
        let (x, y) = axis_point(axis, RADIUS);
        svg.push_str(&format!(
            "  <line x1=\"{CX}\" y1=\"{CY}\" x2=\"{x:.3}\" y2=\"{y:.3}\" \
             stroke=\"#999999\" stroke-width=\"1\"/>\n"
        ));
        let (lx, ly) = axis_point(axis, RADIUS + 16.0);
        let anchor = match axis {
            1 => "start",
            3 => "end",
            _ => "middle",
        };
        svg.push_str(&format!(
            "  <text x=\"{lx:.3}\" y=\"{ly:.3}\" text-anchor=\"{anchor}\" \
             font-size=\"11\">{label}</text>\n"
        ));
    }

    for (idx, (model, ds)) in entries.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let points: Vec<String> = ds
            .as_array()
            .iter()
            .enumerate()
            .map(|(axis, &v)| {
                let (x, y) = axis_point(axis, RADIUS * v.clamp(0.0, 1.0));
                format!("{x:.3},{y:.3}")
            })
            .collect();
        svg.push_str(&format!(
            "  <polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" \
             stroke=\"{color}\" stroke-width=\"2\"><title>{}</title></polygon>\n",
            points.join(" "),
            xml_escape(model)
        ));
        // legend entry
        let ly = 40.0 + 16.0 * idx as f64;
        svg.push_str(&format!(
            "  <rect x=\"8\" y=\"{:.3}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            ly - 9.0
        ));
        svg.push_str(&format!(
            "  <text x=\"22\" y=\"{ly:.3}\" font-size=\"11\">{}</text>\n",
            xml_escape(model)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
