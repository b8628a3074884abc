//! Static SVG rendering of a single key frame.

use std::fmt::Write;

use super::DatamationDoc;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders key frame `index` of `doc`, or `None` when out of range.
pub fn render_svg(doc: &DatamationDoc, index: usize) -> Option<String> {
    let frame = doc.keyframes.get(index)?;
    let (w, h) = (doc.canvas.width, doc.canvas.height);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);
    if let Some(x) = &frame.axes.x {
        for b in &x.bands {
            let mid = (b.start + b.end) / 2.0;
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
                b.start,
                doc.canvas.padding,
                b.start,
                h - doc.canvas.padding
            );
            let _ = writeln!(
                out,
                r##"<text x="{mid:.2}" y="{:.2}" font-size="11" text-anchor="middle" fill="#555555">{}</text>"##,
                h - doc.canvas.padding - 6.0,
                escape(&b.label)
            );
        }
    }
    if let Some(y) = &frame.axes.y {
        for b in &y.bands {
            let mid = (b.start + b.end) / 2.0;
            let _ = writeln!(
                out,
                r##"<text x="{:.2}" y="{mid:.2}" font-size="11" fill="#555555">{}</text>"##,
                doc.canvas.padding,
                escape(&b.label)
            );
        }
    }
    for u in &frame.units {
        if u.opacity <= 0.0 {
            continue;
        }
        let fill = doc
            .palette
            .get(u.color as usize)
            .map(String::as_str)
            .unwrap_or("#888888");
        let _ = writeln!(
            out,
            r#"<circle data-id="{}" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{}" fill-opacity="{}"/>"#,
            u.id, u.x, u.y, u.radius, fill, u.opacity
        );
    }
    for a in &frame.annotations {
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="14" font-weight="bold" text-anchor="middle" fill="#222222">{}</text>"##,
            a.x,
            a.y,
            escape(&a.text)
        );
    }
    if !frame.caption.is_empty() {
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="13" fill="#222222">{}</text>"##,
            doc.canvas.padding,
            doc.canvas.padding - 4.0,
            escape(&frame.caption)
        );
    }
    out.push_str("</svg>\n");
    Some(out)
}
