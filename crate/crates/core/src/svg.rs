//! Minimal SVG rendering of PIT histograms and spatial maps.
//!
//! Every histogram bin and every map pixel is exactly one `<rect>`; nothing
//! else in the documents is a `rect`.

use std::fmt::Write;

use crate::calib::{HistogramReport, PitVector};
use crate::geometry::PointPattern;

const MARGIN: f64 = 40.0;

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Bar chart of the bin counts with the band (if any) as horizontal segments
/// and the null expectation `S / B` as a dashed line.
pub fn histogram_svg(hist: &HistogramReport, title: &str) -> String {
    let (pw, ph) = (360.0, 240.0);
    let (width, height) = (pw + 2.0 * MARGIN, ph + 2.0 * MARGIN);
    let b = hist.n_bins();
    let expected = hist.total() as f64 / b.max(1) as f64;
    let mut top = hist.bin_counts.iter().copied().max().unwrap_or(0) as f64;
    if let Some(band) = &hist.band {
        top = band.upper.iter().copied().fold(top, f64::max);
    }
    let top = (top.max(expected) * 1.1).max(1.0);
    let y_of = |c: f64| MARGIN + ph * (1.0 - c / top);
    let bw = pw / b as f64;

    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (i, &c) in hist.bin_counts.iter().enumerate() {
        let x = MARGIN + i as f64 * bw;
        let y = y_of(c as f64);
        let _ = writeln!(
            out,
            r##"<rect class="bin" x="{:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#9db4d0" stroke="#34495e"/>"##,
            x + 1.0,
            bw - 2.0,
            MARGIN + ph - y
        );
    }
    if let Some(band) = &hist.band {
        for i in 0..b {
            let (x1, x2) = (MARGIN + i as f64 * bw, MARGIN + (i + 1) as f64 * bw);
            for v in [band.lower[i], band.upper[i]] {
                let y = y_of(v);
                let _ = writeln!(
                    out,
                    r##"<line class="band" x1="{x1:.2}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}" stroke="#c0392b" stroke-width="2"/>"##
                );
            }
        }
    }
    let y = y_of(expected);
    let _ = writeln!(
        out,
        r##"<line class="expected" x1="{MARGIN}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#555" stroke-dasharray="4 3"/>"##,
        MARGIN + pw
    );
    let _ = writeln!(
        out,
        r##"<line x1="{MARGIN}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"##,
        MARGIN + ph,
        MARGIN + pw,
        MARGIN + ph
    );
    for (i, e) in hist.bin_edges.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{e:.2}</text>"#,
            MARGIN + i as f64 * bw,
            MARGIN + ph + 15.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Diverging blue–white–red colour for a value in `[0, 1]`, white at 0.5.
pub fn diverging_color(v: f64) -> String {
    let t = (v.clamp(0.0, 1.0) - 0.5) * 2.0;
    let (r, g, b) = if t < 0.0 {
        let a = -t;
        (255.0 * (1.0 - a) + 33.0 * a, 255.0 * (1.0 - a) + 102.0 * a, 255.0 * (1.0 - a) + 172.0 * a)
    } else {
        (255.0 * (1.0 - t) + 178.0 * t, 255.0 * (1.0 - t) + 24.0 * t, 255.0 * (1.0 - t) + 43.0 * t)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Pixel map of the PIT values with the pattern drawn as small circles.
pub fn spatial_map_svg(pit: &PitVector, pattern: Option<&PointPattern>, title: &str) -> String {
    let w = pit.grid.window;
    let scale = 400.0 / w.width().max(w.height());
    let (pw, ph) = (w.width() * scale, w.height() * scale);
    let (width, height) = (pw + 2.0 * MARGIN + 60.0, ph + 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - w.x_min) * scale;
    let sy = |y: f64| MARGIN + (w.y_max - y) * scale;

    let mut out = String::new();
    header(&mut out, width, height);
    out.push_str(
        r##"<defs><linearGradient id="scale" x1="0" y1="1" x2="0" y2="0"><stop offset="0" stop-color="#2166ac"/><stop offset="0.5" stop-color="#ffffff"/><stop offset="1" stop-color="#b2182b"/></linearGradient></defs>
"##,
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" text-anchor="middle">{}</text>"#,
        MARGIN + pw / 2.0,
        escape(title)
    );
    for (s, &v) in pit.values.iter().enumerate() {
        let cell = pit.grid.pixel_window(s);
        let _ = writeln!(
            out,
            r#"<rect class="pixel" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            sx(cell.x_min),
            sy(cell.y_max),
            cell.width() * scale,
            cell.height() * scale,
            diverging_color(v)
        );
    }
    if let Some(pp) = pattern {
        for p in pp.points() {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="none" stroke="black" stroke-width="0.6"/>"#,
                sx(p.x),
                sy(p.y)
            );
        }
    }
    // colour legend as a gradient-filled path so only pixels are rects
    let (lx, ly, lh) = (MARGIN + pw + 20.0, MARGIN, ph.min(200.0));
    let _ = writeln!(
        out,
        r#"<path class="legend" d="M{lx:.2},{ly:.2} h12 v{lh:.2} h-12 z" fill="url(#scale)" stroke="black" stroke-width="0.5"/>"#
    );
    let (hi, mid, lo) = match pit.rank_scale {
        Some(k1) => (k1.to_string(), format!("{}", k1 as f64 / 2.0), "1".to_string()),
        None => ("1".into(), "0.5".into(), "0".into()),
    };
    for (label, y) in [(hi, ly + 4.0), (mid, ly + lh / 2.0 + 4.0), (lo, ly + lh + 4.0)] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{y:.2}">{label}</text>"#, lx + 16.0);
    }
    out.push_str("</svg>\n");
    out
}
