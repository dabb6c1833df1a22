//! Report artifacts: CSV tables (with a config-digest comment line) and
//! minimal self-contained SVG scatter plots.

use std::path::Path;

use anyhow::Result;

use crate::store::write_atomic;

/// Shortest decimal that parses back to the identical f64.
pub fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Writes a CSV artifact: `# config_digest: <hex>` comment, header, rows.
pub fn write_csv(path: &Path, digest: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = format!("# config_digest: {digest}\n");
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub label: String,
    /// Category name; controls the marker color.
    pub category: String,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Renders a labelled scatter plot. Categories are colored in first-seen
/// order and listed in a legend.
pub fn write_scatter_svg(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[ScatterPoint],
) -> Result<()> {
    let (w, h) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);

    let finite = |vals: &mut dyn Iterator<Item = f64>, init: f64, pick: fn(f64, f64) -> f64| {
        vals.fold(init, |a, v| pick(a, v))
    };
    let x_min = finite(&mut points.iter().map(|p| p.x), f64::INFINITY, f64::min);
    let x_max = finite(&mut points.iter().map(|p| p.x), f64::NEG_INFINITY, f64::max);
    let y_min = finite(&mut points.iter().map(|p| p.y), f64::INFINITY, f64::min);
    let y_max = finite(&mut points.iter().map(|p| p.y), f64::NEG_INFINITY, f64::max);
    let pad = |lo: f64, hi: f64| {
        let span = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (x_lo, x_hi) = pad(x_min, x_max);
    let (y_lo, y_hi) = pad(y_min, y_max);
    let sx = |x: f64| ml + (x - x_lo) / (x_hi - x_lo) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y_lo) / (y_hi - y_lo) * (h - mt - mb);

    let mut categories: Vec<&str> = Vec::new();
    for p in points {
        if !categories.contains(&p.category.as_str()) {
            categories.push(&p.category);
        }
    }
    let color_of = |cat: &str| {
        let idx = categories.iter().position(|c| *c == cat).unwrap_or(0);
        PALETTE[idx % PALETTE.len()]
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        w / 2.0,
        xml_escape(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        (ml + w - mr) / 2.0,
        h - 12.0,
        xml_escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0,
        xml_escape(y_label)
    ));
    // Axis range annotations.
    svg.push_str(&format!(
        "<text x=\"{ml}\" y=\"{:.1}\" text-anchor=\"middle\">{x_lo:.3}</text>\n\
         <text x=\"{:.1}\" y=\"{0:.1}\" text-anchor=\"middle\">{x_hi:.3}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{y_lo:.3}</text>\n\
         <text x=\"{2:.1}\" y=\"{mt}\" text-anchor=\"end\">{y_hi:.3}</text>\n",
        h - mb + 16.0,
        w - mr,
        ml - 6.0,
        h - mb,
    ));
    for p in points {
        let (cx, cy) = (sx(p.x), sy(p.y));
        svg.push_str(&format!(
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"{}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"9\">{}</text>\n",
            color_of(&p.category),
            cx + 5.0,
            cy - 5.0,
            xml_escape(&p.label)
        ));
    }
    for (i, cat) in categories.iter().enumerate() {
        let y = mt + 14.0 * i as f64;
        svg.push_str(&format!(
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"{}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            w - mr - 150.0,
            y,
            PALETTE[i % PALETTE.len()],
            w - mr - 142.0,
            y + 4.0,
            xml_escape(cat)
        ));
    }
    svg.push_str("</svg>\n");
    write_atomic(path, svg.as_bytes())?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_artifact_carries_the_digest_comment() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(
            &path,
            "deadbeef",
            &["a", "b"],
            &[vec!["1".into(), "2".into()]],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# config_digest: deadbeef\n"));
        assert!(text.contains("a,b\n1,2\n"));
    }

    #[test]
    fn scatter_svg_is_well_formed_enough() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.svg");
        let pts = vec![
            ScatterPoint { x: 1.0, y: 2.0, label: "A".into(), category: "GOOD".into() },
            ScatterPoint { x: 3.0, y: 1.0, label: "B".into(), category: "BAD".into() },
        ];
        write_scatter_svg(&path, "t", "x", "y", &pts).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.trim_end().ends_with("</svg>"));
        assert_eq!(text.matches("<circle").count(), 4); // 2 points + 2 legend
    }
}
