//! Static SVG of the learning curves: one panel per batch size, two
//! panels per row, unregularised runs grey, dropout green, dither red.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::LearningCurve;
use crate::{Error, Result};

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 52.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 40.0;
const LEGEND_H: f64 = 30.0;
const PANELS_PER_ROW: usize = 2;

fn colour(regulariser: &str) -> &'static str {
    match regulariser {
        "none" => "#808080",
        "dropout" => "#2ca02c",
        "dither" => "#d62728",
        _ => "#000000",
    }
}

pub fn render_svg(curves: &[LearningCurve]) -> String {
    let mut batch_sizes: Vec<usize> = curves.iter().map(|c| c.batch_size).collect();
    batch_sizes.sort_unstable();
    batch_sizes.dedup();

    let mut regularisers: Vec<&str> = curves.iter().map(|c| c.regulariser.as_str()).collect();
    regularisers.sort_unstable();
    regularisers.dedup();

    let panels = batch_sizes.len().max(1);
    let cols = panels.min(PANELS_PER_ROW);
    let rows = panels.div_ceil(PANELS_PER_ROW);
    let width = cols as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H + LEGEND_H;

    let max_epoch = curves.iter().map(|c| c.errors.len()).max().unwrap_or(1).max(1);
    let max_err = curves.iter().flat_map(|c| c.errors.iter().copied()).fold(0.0, f64::max);
    let y_top = ((max_err * 10.0).ceil() / 10.0).clamp(0.1, 1.0);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();

    for (p, &bs) in batch_sizes.iter().enumerate() {
        let ox = (p % PANELS_PER_ROW) as f64 * PANEL_W;
        let oy = (p / PANELS_PER_ROW) as f64 * PANEL_H;
        let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
        let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
        let x0 = ox + MARGIN_L;
        let y0 = oy + MARGIN_T;
        let px = |epoch: usize| {
            if max_epoch == 1 {
                x0 + plot_w / 2.0
            } else {
                x0 + plot_w * (epoch - 1) as f64 / (max_epoch - 1) as f64
            }
        };
        let py = |err: f64| y0 + plot_h * (1.0 - err / y_top);

        writeln!(s, r#"<g class="panel" data-batch-size="{bs}">"#).unwrap();
        writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#000000"/>"##
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">batch size {bs}</text>"#,
            x0 + plot_w / 2.0,
            oy + 18.0
        )
        .unwrap();

        for t in 0..=4 {
            let v = y_top * f64::from(t) / 4.0;
            let y = py(v);
            writeln!(
                s,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#000000"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                y + 4.0
            )
            .unwrap();
        }
        let mut xticks = vec![1, max_epoch];
        if max_epoch > 2 {
            xticks.insert(1, max_epoch.div_ceil(2));
        }
        xticks.dedup();
        for e in xticks {
            let x = px(e);
            writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000000"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{e}</text>"##,
                y0 + plot_h,
                y0 + plot_h + 4.0,
                y0 + plot_h + 16.0
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">epoch</text>"#,
            x0 + plot_w / 2.0,
            y0 + plot_h + 32.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle">test error</text>"#,
            ox + 14.0,
            y0 + plot_h / 2.0
        )
        .unwrap();

        let mut panel_curves: Vec<&LearningCurve> = curves.iter().filter(|c| c.batch_size == bs).collect();
        panel_curves.sort_by(|a, b| (&a.regulariser, a.seed).cmp(&(&b.regulariser, b.seed)));
        for c in panel_curves {
            let points: Vec<String> =
                c.errors.iter().enumerate().map(|(i, &e)| format!("{:.2},{:.2}", px(i + 1), py(e))).collect();
            writeln!(
                s,
                r#"<polyline class="curve {}" data-seed="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                c.regulariser,
                c.seed,
                colour(&c.regulariser),
                points.join(" ")
            )
            .unwrap();
        }
        writeln!(s, "</g>").unwrap();
    }

    let ly = rows as f64 * PANEL_H + LEGEND_H / 2.0;
    for (i, reg) in regularisers.iter().enumerate() {
        let lx = MARGIN_L + i as f64 * 110.0;
        writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{reg}</text>"#,
            lx + 24.0,
            colour(reg),
            lx + 30.0,
            ly + 4.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(curves: &[LearningCurve], path: &Path) -> Result<()> {
    fs::write(path, render_svg(curves)).map_err(|e| Error::io(path, e))
}
