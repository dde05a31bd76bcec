//! Minimal static SVG 1.1 line charts: axes, ticks, series, legend.
//! Presentation only; all numbers are formatted with fixed precision so the
//! output is byte-stable.

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f",
];

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

impl LineChart {
    pub fn render(&self, header_comment: &str) -> String {
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &(x, y) in &s.points {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
        if !x_min.is_finite() {
            (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
        }
        if x_max == x_min {
            x_max = x_min + 1.0;
        }
        // pad the value axis a little
        let pad = ((y_max - y_min) * 0.05).max(1e-6);
        y_min -= pad;
        y_max += pad;

        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
        let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str(&format!("<!-- {header_comment} -->\n"));
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        out.push_str(&format!(
            "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"18\" text-anchor=\"middle\">{}</text>\n",
            fmt(MARGIN_LEFT + plot_w / 2.0),
            self.title
        ));

        // frame
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
            fmt(MARGIN_LEFT),
            fmt(MARGIN_TOP),
            fmt(plot_w),
            fmt(plot_h)
        ));

        // ticks
        for k in 0..=5 {
            let fx = x_min + (x_max - x_min) * k as f64 / 5.0;
            let px = sx(fx);
            out.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
                fmt(px),
                fmt(MARGIN_TOP + plot_h),
                fmt(MARGIN_TOP + plot_h + 6.0)
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                fmt(px),
                fmt(MARGIN_TOP + plot_h + 22.0),
                tick_label(fx)
            ));
            let fy = y_min + (y_max - y_min) * k as f64 / 5.0;
            let py = sy(fy);
            out.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"black\"/>\n",
                fmt(MARGIN_LEFT - 6.0),
                fmt(MARGIN_LEFT),
                fmt(py)
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
                fmt(MARGIN_LEFT - 10.0),
                fmt(py + 4.0),
                tick_label(fy)
            ));
        }

        // axis labels
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
            fmt(MARGIN_LEFT + plot_w / 2.0),
            fmt(HEIGHT - 12.0),
            self.x_label
        ));
        out.push_str(&format!(
            "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
            fmt(MARGIN_TOP + plot_h / 2.0),
            fmt(MARGIN_TOP + plot_h / 2.0),
            self.y_label
        ));

        // series
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{},{}", fmt(sx(x)), fmt(sy(y))))
                .collect();
            out.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                pts.join(" ")
            ));
            let ly = MARGIN_TOP + 16.0 + 18.0 * i as f64;
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
                fmt(WIDTH - MARGIN_RIGHT + 10.0),
                fmt(ly - 4.0),
                fmt(WIDTH - MARGIN_RIGHT + 34.0),
                fmt(ly - 4.0)
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
                fmt(WIDTH - MARGIN_RIGHT + 40.0),
                fmt(ly),
                s.label
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}
