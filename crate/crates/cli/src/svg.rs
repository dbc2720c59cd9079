//! Minimal SVG line plots on the unit square.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn px(x: f64) -> f64 {
    MARGIN + x.clamp(0.0, 1.0) * (WIDTH - 2.0 * MARGIN)
}

fn py(y: f64) -> f64 {
    HEIGHT - MARGIN - y.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Curves drawn as polylines, markers drawn as circles, both in `[0, 1]²`.
pub fn render(title: &str, x_label: &str, y_label: &str, curves: &[Series], markers: &[Series]) -> String {
    let mut s = String::new();
    let w = |s: &mut String, text: String| s.push_str(&text);
    w(
        &mut s,
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        ),
    );
    w(&mut s, format!("<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"));
    w(&mut s, format!("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", WIDTH / 2.0, escape(title)));
    // axes and ticks
    w(
        &mut s,
        format!(
            "<path d=\"M{:.1},{:.1} L{:.1},{:.1} L{:.1},{:.1}\" fill=\"none\" stroke=\"black\"/>\n",
            px(0.0),
            py(1.0),
            px(0.0),
            py(0.0),
            px(1.0),
            py(0.0)
        ),
    );
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        w(&mut s, format!("<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"black\"/>\n", px(t), py(0.0), py(0.0) + 5.0));
        w(&mut s, format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{t:.1}</text>\n", px(t), py(0.0) + 18.0));
        w(&mut s, format!("<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{2:.1}\" y2=\"{1:.1}\" stroke=\"black\"/>\n", px(0.0) - 5.0, py(t), px(0.0)));
        w(&mut s, format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{t:.1}</text>\n", px(0.0) - 8.0, py(t) + 4.0));
    }
    w(&mut s, format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n", WIDTH / 2.0, HEIGHT - 14.0, escape(x_label)));
    w(
        &mut s,
        format!("<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n", HEIGHT / 2.0, HEIGHT / 2.0, escape(y_label)),
    );

    let mut legend_row = 0;
    let mut legend = |s: &mut String, color: &str, label: &str, marker: bool| {
        let y = MARGIN + 16.0 * legend_row as f64;
        let x = px(0.05);
        if marker {
            let _ = writeln!(s, "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.5\" fill=\"{color}\"/>", x + 10.0, y - 4.0);
        } else {
            let _ = writeln!(s, "<line x1=\"{x:.1}\" y1=\"{0:.1}\" x2=\"{1:.1}\" y2=\"{0:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>", y - 4.0, x + 20.0);
        }
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{y:.1}\">{}</text>", x + 26.0, escape(label));
        legend_row += 1;
    };

    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (k, &(x, y)) in c.points.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { 'M' } else { 'L' }, px(x), py(y));
        }
        let _ = writeln!(s, "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>", d.trim_end());
        legend(&mut s, color, &c.label, false);
    }
    for (i, m) in markers.iter().enumerate() {
        let color = COLORS[(curves.len() + i) % COLORS.len()];
        for &(x, y) in &m.points {
            let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"{color}\"/>", px(x), py(y));
        }
        legend(&mut s, color, &m.label, true);
    }
    s.push_str("</svg>\n");
    s
}
