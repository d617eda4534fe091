use std::fmt::Write;

use busemann_core::model::EmbeddedExample;
use busemann_core::PrototypeSet;

pub const VIEWBOX: f64 = 1000.0;
const CENTER: f64 = VIEWBOX / 2.0;
/// Radius of the unit circle in viewbox units; the rest is margin for labels.
pub const BALL_RADIUS: f64 = 450.0;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn color(class: usize) -> String {
    match PALETTE.get(class) {
        Some(c) => (*c).to_string(),
        None => format!("hsl({}, 65%, 45%)", (class * 137) % 360),
    }
}

/// Ball coordinates to screen coordinates, y pointing down.
pub fn to_screen(x: f64, y: f64) -> (f64, f64) {
    (CENTER + BALL_RADIUS * x, CENTER - BALL_RADIUS * y)
}

/// Unit circle, prototypes on it and examples colored by true class.
/// Callers guarantee two-dimensional embeddings and prototypes.
pub fn render(examples: &[EmbeddedExample], protos: &PrototypeSet) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {VIEWBOX} {VIEWBOX}" width="{VIEWBOX}" height="{VIEWBOX}">"#
    );
    let _ = writeln!(out, r#"<rect width="{VIEWBOX}" height="{VIEWBOX}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<circle class="boundary" cx="{CENTER}" cy="{CENTER}" r="{BALL_RADIUS}" fill="none" stroke="black" stroke-width="2"/>"#
    );
    for ex in examples {
        let c = ex.embedding.coords();
        let (sx, sy) = to_screen(c[0], c[1]);
        let _ = writeln!(
            out,
            r#"<circle class="example" data-label="{}" cx="{sx:.4}" cy="{sy:.4}" r="3" fill="{}" fill-opacity="0.7"/>"#,
            ex.label,
            color(ex.label)
        );
    }
    for p in protos.iter() {
        let c = p.point.coords();
        let (sx, sy) = to_screen(c[0], c[1]);
        let (lx, ly) = to_screen(c[0] * 1.07, c[1] * 1.07);
        let _ = writeln!(
            out,
            r#"<circle class="prototype" data-label="{}" cx="{sx:.4}" cy="{sy:.4}" r="8" fill="{}" stroke="black"/>"#,
            p.label,
            color(p.label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{lx:.4}" y="{ly:.4}" font-size="20" text-anchor="middle" dominant-baseline="middle">{}</text>"#,
            p.label
        );
    }
    out.push_str("</svg>\n");
    out
}
