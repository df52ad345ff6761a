//! Minimal SVG line charts: axes, polylines, scatter markers, legend.
//! Enough to plot detection curves and empirical overlays without pulling
//! in a plotting dependency; output is a deterministic string.

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// A named point set; rendered as a polyline or as circle markers.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Series>,
    /// Marker-only series; series `i` shares its color with line `i`.
    pub scatters: Vec<Series>,
    /// Fixed y range; data bounds otherwise.
    pub y_range: Option<(f64, f64)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

impl LineChart {
    pub fn to_svg(&self, width: u32, height: u32) -> String {
        let w = f64::from(width);
        let h = f64::from(height);
        let (ml, mr, mt, mb) = (58.0, 16.0, 34.0, 46.0);
        let plot_w = (w - ml - mr).max(1.0);
        let plot_h = (h - mt - mb).max(1.0);

        let all_points = self
            .lines
            .iter()
            .chain(self.scatters.iter())
            .flat_map(|s| s.points.iter().copied());
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for (x, y) in all_points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        if !x_min.is_finite() {
            x_min = 0.0;
            x_max = 1.0;
            y_min = 0.0;
            y_max = 1.0;
        }
        if let Some((lo, hi)) = self.y_range {
            y_min = lo;
            y_max = hi;
        }
        if x_max - x_min < 1e-12 {
            x_max = x_min + 1.0;
        }
        if y_max - y_min < 1e-12 {
            y_max = y_min + 1.0;
        }

        let to_px = |x: f64, y: f64| -> (f64, f64) {
            (
                ml + (x - x_min) / (x_max - x_min) * plot_w,
                mt + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h,
            )
        };

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
             viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
        ));
        svg.push_str(&format!(
            "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
            fmt(w / 2.0),
            escape(&self.title)
        ));

        // Gridlines and tick labels, five per axis.
        for i in 0..=4 {
            let t = f64::from(i) / 4.0;
            let yv = y_min + t * (y_max - y_min);
            let (_, py) = to_px(x_min, yv);
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
                fmt(ml),
                fmt(py),
                fmt(ml + plot_w),
                fmt(py)
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                fmt(ml - 6.0),
                fmt(py + 4.0),
                fmt(yv)
            ));
            let xv = x_min + t * (x_max - x_min);
            let (px, _) = to_px(xv, y_min);
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                fmt(px),
                fmt(mt + plot_h + 16.0),
                fmt(xv)
            ));
        }
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
            fmt(ml),
            fmt(mt),
            fmt(plot_w),
            fmt(plot_h)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt(ml + plot_w / 2.0),
            fmt(h - 10.0),
            escape(&self.x_label)
        ));
        svg.push_str(&format!(
            "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
            fmt(mt + plot_h / 2.0),
            fmt(mt + plot_h / 2.0),
            escape(&self.y_label)
        ));

        for (i, series) in self.lines.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let coords: Vec<String> = series
                .points
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = to_px(x, y);
                    format!("{},{}", fmt(px), fmt(py))
                })
                .collect();
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                coords.join(" ")
            ));
        }
        for (i, series) in self.scatters.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            for &(x, y) in &series.points {
                let (px, py) = to_px(x, y);
                svg.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.7\"/>\n",
                    fmt(px),
                    fmt(py)
                ));
            }
        }

        // Legend, bottom-right inside the plot area.
        let legend: Vec<&Series> = self
            .lines
            .iter()
            .chain(self.scatters.iter().filter(|s| !s.label.is_empty()))
            .collect();
        for (i, series) in legend.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let y = mt + plot_h - 12.0 * (legend.len() - i) as f64;
            let x = ml + plot_w - 120.0;
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                fmt(x),
                fmt(y - 3.0),
                fmt(x + 18.0),
                fmt(y - 3.0)
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\">{}</text>\n",
                fmt(x + 24.0),
                fmt(y),
                escape(&series.label)
            ));
        }

        svg.push_str("</svg>\n");
        svg
    }
}
