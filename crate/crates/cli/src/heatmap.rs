use std::fmt::Write as _;

use ctbn_core::Generator;

const CANVAS: f64 = 640.0;

/// Linear blend of two RGB colours.
fn blend(a: [f64; 3], b: [f64; 3], t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let c: Vec<u8> = (0..3).map(|k| (a[k] + (b[k] - a[k]) * t).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Position of `v` on a log scale spanning `[lo, hi]`.
fn log_position(v: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 1.0;
    }
    (v.ln() - lo.ln()) / (hi.ln() - lo.ln())
}

fn positive_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| *v > 0.0).fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// SVG rendering of a generator. Off-diagonal rates use a pale-to-red log
/// ramp with zeros left white; diagonal entries use a grey-to-black log ramp
/// on their magnitude.
pub fn render(q: &Generator, title: &str) -> String {
    let n = q.dim();
    let cell = (CANVAS / n as f64).max(4.0);
    let side = cell * n as f64;
    let margin = 24.0;
    let rates = q.rates();
    let off = positive_range(
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| rates[(i, j)]),
    );
    let diag = positive_range((0..n).map(|i| -rates[(i, i)]));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = side,
        h = side + margin
    );
    let _ = writeln!(svg, r#"<text x="2" y="16" font-family="sans-serif" font-size="13">{title}</text>"#);
    let _ = writeln!(svg, r#"<g transform="translate(0,{margin})">"#);
    let _ = writeln!(svg, r##"<rect width="{side}" height="{side}" fill="#ffffff"/>"##);
    for i in 0..n {
        for j in 0..n {
            let v = rates[(i, j)];
            let fill = if i == j {
                if v == 0.0 {
                    continue;
                }
                blend([110.0, 110.0, 120.0], [10.0, 10.0, 20.0], log_position(-v, diag.0, diag.1))
            } else {
                if v <= 0.0 {
                    continue;
                }
                blend([255.0, 237.0, 160.0], [189.0, 0.0, 38.0], log_position(v, off.0, off.1))
            };
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                j as f64 * cell,
                i as f64 * cell,
                cell,
                cell
            );
        }
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}
