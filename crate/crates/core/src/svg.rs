//! Minimal SVG 1.1 writer used for every plot the crate emits.

use std::fmt::Write as _;

use crate::geometry::Vec2;

/// Drawing surface mapping a world-coordinate box onto a pixel canvas,
/// y pointing up.
pub struct Canvas {
    width: f64,
    height: f64,
    pad: f64,
    min: Vec2,
    scale: Vec2,
    body: String,
}

impl Canvas {
    /// Independent x/y scales, e.g. for charts.
    pub fn new(width: f64, height: f64, min: Vec2, max: Vec2) -> Self {
        let pad = 40.0;
        let span = (max - min).map(|v| if v.abs() < 1e-300 { 1.0 } else { v });
        let scale = Vec2::new((width - 2.0 * pad) / span.x, (height - 2.0 * pad) / span.y);
        Self {
            width,
            height,
            pad,
            min,
            scale,
            body: String::new(),
        }
    }

    /// One scale for both axes; the canvas height follows from the aspect ratio.
    pub fn equal(width: f64, min: Vec2, max: Vec2) -> Self {
        let pad = 40.0;
        let span = max - min;
        let s = (width - 2.0 * pad) / span.x.max(1e-300);
        let height = span.y * s + 2.0 * pad;
        let mut c = Self::new(width, height, min, max);
        c.scale = Vec2::new(s, s);
        c
    }

    pub fn map(&self, p: Vec2) -> (f64, f64) {
        (
            self.pad + (p.x - self.min.x) * self.scale.x,
            self.height - self.pad - (p.y - self.min.y) * self.scale.y,
        )
    }

    pub fn polyline<I: IntoIterator<Item = Vec2>>(&mut self, pts: I, stroke: &str, width: f64) {
        let mut d = String::new();
        for p in pts {
            let (x, y) = self.map(p);
            let _ = write!(d, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}" stroke-linejoin="round"/>"#,
            d.trim_end()
        );
    }

    pub fn line(&mut self, a: Vec2, b: Vec2, stroke: &str, width: f64) {
        let (x1, y1) = self.map(a);
        let (x2, y2) = self.map(b);
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#
        );
    }

    /// Circle with a radius in world units (equal-scale canvases only).
    pub fn circle(&mut self, c: Vec2, r: f64, stroke: &str, fill: &str) {
        let (x, y) = self.map(c);
        let r = r * self.scale.x;
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" stroke="{stroke}" fill="{fill}"/>"#
        );
    }

    /// Dot with a radius in pixels.
    pub fn dot(&mut self, c: Vec2, r_px: f64, fill: &str) {
        let (x, y) = self.map(c);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r_px}" fill="{fill}"/>"#
        );
    }

    /// Annulus drawn with the even-odd rule.
    pub fn annulus(&mut self, c: Vec2, inner: f64, outer: f64, fill: &str) {
        let (x, y) = self.map(c);
        let (ri, ro) = (inner * self.scale.x, outer * self.scale.x);
        let _ = writeln!(
            self.body,
            r#"<path fill-rule="evenodd" fill="{fill}" d="M {a:.2} {y:.2} A {ro:.2} {ro:.2} 0 1 0 {b:.2} {y:.2} A {ro:.2} {ro:.2} 0 1 0 {a:.2} {y:.2} Z M {c1:.2} {y:.2} A {ri:.2} {ri:.2} 0 1 0 {c2:.2} {y:.2} A {ri:.2} {ri:.2} 0 1 0 {c1:.2} {y:.2} Z"/>"#,
            a = x - ro,
            b = x + ro,
            c1 = x - ri,
            c2 = x + ri,
        );
    }

    pub fn rect(&mut self, min: Vec2, max: Vec2, stroke: &str, fill: &str) {
        let (x0, y1) = self.map(min);
        let (x1, y0) = self.map(max);
        let _ = writeln!(
            self.body,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" stroke="{stroke}" fill="{fill}"/>"#,
            x1 - x0,
            y1 - y0
        );
    }

    pub fn text(&mut self, p: Vec2, s: &str, size: f64) {
        let (x, y) = self.map(p);
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="{size}">{}</text>"#,
            escape(s)
        );
    }

    /// Text at raw pixel coordinates.
    pub fn label(&mut self, x: f64, y: f64, s: &str, size: f64) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="{size}">{}</text>"#,
            escape(s)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
