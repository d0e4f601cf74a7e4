use std::fmt::Write;

use crate::kshape::KShapeModel;
use crate::scalar::Scalar;
use crate::tda::{Bar, Barcode};

const WIDTH: f64 = 640.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 30.0;
const BAR_HEIGHT: f64 = 8.0;
const BAR_GAP: f64 = 4.0;
const PANEL_TITLE: f64 = 28.0;
const AXIS_SPACE: f64 = 36.0;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Round tick values covering `[0, max]`.
fn ticks(max: f64) -> Vec<f64> {
    if max <= 0.0 || !max.is_finite() {
        return vec![0.0];
    }
    let raw = max / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    (0..).map(|i| i as f64 * step).take_while(|v| *v <= max * (1.0 + 1e-9)).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Two-panel barcode plot (dimension 0 above dimension 1). Bars are
/// ordered by birth, then persistence; infinite bars run to `cap` and end
/// in an arrowhead.
pub fn render_barcode_svg<F: Scalar>(barcode: &Barcode<F>, cap: F) -> String {
    render_barcode_svg_titled(barcode, cap, "")
}

pub fn render_barcode_svg_titled<F: Scalar>(barcode: &Barcode<F>, cap: F, title: &str) -> String {
    let finite_max = barcode.max_finite().to_f64_lossy();
    let mut x_max = cap.to_f64_lossy();
    if !x_max.is_finite() || x_max < finite_max {
        x_max = finite_max;
    }
    if x_max <= 0.0 {
        x_max = 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let sx = |v: f64| MARGIN_LEFT + plot_w * v.min(x_max) / x_max;

    let sorted = |bars: &[Bar<F>]| {
        let mut v: Vec<(f64, f64, bool)> =
            bars.iter().map(|b| (b.birth.to_f64_lossy(), b.death.to_f64_lossy(), b.is_infinite())).collect();
        v.sort_by(|a, b| {
            let pa = a.1.min(x_max) - a.0;
            let pb = b.1.min(x_max) - b.0;
            a.0.total_cmp(&b.0).then(pa.total_cmp(&pb))
        });
        v
    };
    let panels = [sorted(barcode.dim(0)), sorted(barcode.dim(1))];
    let panel_height = |n: usize| PANEL_TITLE + (n.max(1) as f64) * (BAR_HEIGHT + BAR_GAP) + AXIS_SPACE;
    let title_space = if title.is_empty() { 10.0 } else { 30.0 };
    let height = title_space + panels.iter().map(|p| panel_height(p.len())).sum::<f64>() + 10.0;

    let mut s = String::new();
    let _ = write!(
        s,
        r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">
<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#333"/></marker></defs>
"##
    );
    if !title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
    }
    if barcode.is_empty() {
        let _ = writeln!(
            s,
            r#"<text class="caption" x="{}" y="{}" text-anchor="middle">no features</text>"#,
            WIDTH / 2.0,
            title_space + 20.0
        );
    }

    let mut top = title_space;
    for (dim, bars) in panels.iter().enumerate() {
        let h = panel_height(bars.len());
        let color = PALETTE[dim];
        let _ = writeln!(s, r#"<g class="panel" id="h{dim}">"#);
        let _ = writeln!(s, r#"<text x="{MARGIN_LEFT}" y="{}" font-size="12">H{dim}</text>"#, top + 18.0);
        let axis_y = top + h - AXIS_SPACE + 6.0;
        for (row, &(birth, death, infinite)) in bars.iter().enumerate() {
            let y = top + PANEL_TITLE + row as f64 * (BAR_HEIGHT + BAR_GAP);
            let x0 = sx(birth);
            let x1 = sx(if infinite { x_max } else { death });
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{x0:.3}" y="{y:.3}" width="{:.3}" height="{BAR_HEIGHT}" fill="{color}"/>"#,
                (x1 - x0).max(0.0)
            );
            if infinite {
                let yc = y + BAR_HEIGHT / 2.0;
                let _ = writeln!(
                    s,
                    r##"<line class="infinite" x1="{x0:.3}" y1="{yc:.3}" x2="{:.3}" y2="{yc:.3}" stroke="#333" marker-end="url(#arrow)"/>"##,
                    x1 + 8.0
                );
            }
        }
        if bars.is_empty() {
            let _ = writeln!(
                s,
                r##"<text x="{}" y="{}" fill="#777">none</text>"##,
                MARGIN_LEFT + 4.0,
                top + PANEL_TITLE + 8.0
            );
        }
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_LEFT}" y1="{axis_y:.3}" x2="{:.3}" y2="{axis_y:.3}" stroke="#000"/>"##,
            WIDTH - MARGIN_RIGHT
        );
        for t in ticks(x_max) {
            let x = sx(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.3}" y1="{axis_y:.3}" x2="{x:.3}" y2="{:.3}" stroke="#000"/><text x="{x:.3}" y="{:.3}" text-anchor="middle">{}</text>"##,
                axis_y + 4.0,
                axis_y + 16.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.3}" text-anchor="middle">filtration value</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            axis_y + 30.0
        );
        s.push_str("</g>\n");
        top += h;
    }
    s.push_str("</svg>\n");
    s
}

/// Centroid series as polylines, with a legend giving each cluster's size.
pub fn render_centroids_svg<F: Scalar + serde::Serialize>(model: &KShapeModel<F>) -> String {
    render_centroid_lines(&model.centroids, &model.cluster_sizes(), "")
}

/// Polyline plot of arbitrary centroid series. The vertical range adapts
/// to the data so every point lies inside the viewBox.
pub fn render_centroid_lines<F: Scalar>(centroids: &[Vec<F>], sizes: &[usize], title: &str) -> String {
    let (width, height) = (640.0, 360.0);
    let (left, right, top, bottom) = (50.0, 150.0, if title.is_empty() { 20.0 } else { 40.0 }, 40.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let values = centroids.iter().flatten().map(|v| v.to_f64_lossy()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        (lo, hi) = (lo - 1.0, hi + 1.0);
    }
    let len = centroids.iter().map(Vec::len).max().unwrap_or(0);
    let sx = |i: usize| left + if len > 1 { plot_w * i as f64 / (len - 1) as f64 } else { plot_w / 2.0 };
    let sy = |v: f64| top + plot_h * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = write!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">
"#
    );
    if !title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
            left + plot_w / 2.0,
            escape(title)
        );
    }
    let _ =
        writeln!(s, r##"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##);
    let _ = writeln!(s, r#"<text x="{}" y="{:.3}" text-anchor="end">{}</text>"#, left - 4.0, top + 4.0, fmt_tick(hi));
    let _ =
        writeln!(s, r#"<text x="{}" y="{:.3}" text-anchor="end">{}</text>"#, left - 4.0, top + plot_h, fmt_tick(lo));
    let _ =
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">period</text>"#, left + plot_w / 2.0, height - 10.0);
    if lo < 0.0 && hi > 0.0 {
        let y0 = sy(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y0:.3}" x2="{:.3}" y2="{y0:.3}" stroke="#ccc" stroke-dasharray="4 3"/>"##,
            left + plot_w
        );
    }
    for (c, centroid) in centroids.iter().enumerate() {
        let points: Vec<String> = centroid
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let v = v.to_f64_lossy();
                format!("{:.3},{:.3}", sx(i), sy(if v.is_finite() { v } else { 0.0 }))
            })
            .collect();
        let color = PALETTE[c % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polyline class="centroid" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
    }
    s.push_str("<g class=\"legend\">\n");
    for (c, _) in centroids.iter().enumerate() {
        let y = top + 10.0 + c as f64 * 18.0;
        let x = left + plot_w + 15.0;
        let size = sizes.get(c).copied().unwrap_or(0);
        let color = PALETTE[c % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<g class="entry"><line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">cluster {c} (n={size})</text></g>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}
