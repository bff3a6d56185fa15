//! Minimal SVG output for d = 2 scenes: tilings with type-coded colors,
//! cross-section points, and tower squares. Coordinates are converted
//! to f64 at the last moment; nothing here feeds back into any logic.

use crate::diophantine::SegLabel;
use crate::geometry::{CrossSection, Point, Rect, Window};
use crate::tiling::{RegularTiling, TileType};
use crate::towers::TowerFamily;
use std::fmt::Write as _;

const TYPE_COLORS: [&str; 4] = ["#e8f0fe", "#fde2e2", "#e2f7e2", "#fff3cd"];

pub struct SvgScene {
    min: [f64; 2],
    max: [f64; 2],
    body: String,
}

impl SvgScene {
    pub fn new() -> Self {
        SvgScene {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
            body: String::new(),
        }
    }

    fn grow(&mut self, x: f64, y: f64) {
        self.min[0] = self.min[0].min(x);
        self.min[1] = self.min[1].min(y);
        self.max[0] = self.max[0].max(x);
        self.max[1] = self.max[1].max(y);
    }

    pub fn rect(&mut self, r: &Rect, fill: &str, stroke: &str) {
        assert_eq!(r.dim(), 2, "svg output is two-dimensional");
        let x = r.lo[0].to_f64();
        let y = r.lo[1].to_f64();
        let w = r.side(0).to_f64();
        let h = r.side(1).to_f64();
        self.grow(x, y);
        self.grow(x + w, y + h);
        writeln!(
            self.body,
            r#"<rect x="{:.6}" y="{:.6}" width="{:.6}" height="{:.6}" fill="{}" stroke="{}" stroke-width="0.03"/>"#,
            x, y, w, h, fill, stroke
        )
        .unwrap();
    }

    pub fn point(&mut self, p: &Point, color: &str) {
        let x = p.0[0].to_f64();
        let y = p.0[1].to_f64();
        self.grow(x, y);
        writeln!(
            self.body,
            r#"<circle cx="{:.6}" cy="{:.6}" r="0.12" fill="{}"/>"#,
            x, y, color
        )
        .unwrap();
    }

    pub fn finish(self) -> String {
        let (w, h) = (
            (self.max[0] - self.min[0]).max(1.0),
            (self.max[1] - self.min[1]).max(1.0),
        );
        let pad = 0.02 * w.max(h);
        format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.6} {:.6} {:.6} {:.6}">"#,
                "\n<g transform=\"translate(0,{:.6}) scale(1,-1)\">\n{}</g>\n</svg>\n"
            ),
            self.min[0] - pad,
            self.min[1] - pad,
            w + 2.0 * pad,
            h + 2.0 * pad,
            self.min[1] + self.max[1],
            self.body
        )
    }
}

impl Default for SvgScene {
    fn default() -> Self {
        Self::new()
    }
}

fn type_color(t: &TileType) -> &'static str {
    let mut idx = 0usize;
    for l in t {
        idx = idx * 2 + usize::from(*l == SegLabel::Alpha);
    }
    TYPE_COLORS[idx % TYPE_COLORS.len()]
}

/// Render a regular tiling with one fill color per tile type.
pub fn render_regular_tiling(tiling: &RegularTiling) -> String {
    let mut scene = SvgScene::new();
    if let Window::Box { rect } = &tiling.window {
        scene.rect(rect, "none", "#bbbbbb");
    }
    for region in &tiling.region {
        scene.rect(region, "none", "#888888");
    }
    for tile in &tiling.tiles {
        scene.rect(&tile.rect(), type_color(&tile.tile_type), "#555555");
    }
    scene.finish()
}

/// Render a cross-section inside its window, with the lacunarity body
/// around each point.
pub fn render_cross_section(window: &Window, section: &CrossSection, body: Option<&Rect>) -> String {
    let mut scene = SvgScene::new();
    scene.rect(&window.fundamental_domain(), "none", "#bbbbbb");
    for p in section.iter() {
        let wrapped = window.wrap(p);
        if let Some(b) = body {
            for piece in window.translate_pieces(&wrapped, b) {
                scene.rect(&piece, "#e8f0fe", "#7799cc");
            }
        }
        scene.point(&wrapped, "#333333");
    }
    scene.finish()
}

/// Render the tower squares, one stroke shade per level.
pub fn render_tower_family(family: &TowerFamily) -> String {
    let shades = ["#c44", "#48c", "#4a4", "#a4a", "#aa4"];
    let mut scene = SvgScene::new();
    scene.rect(&family.window.fundamental_domain(), "none", "#bbbbbb");
    for idx in 0..family.squares.len() {
        let level = family.squares[idx].level;
        let color = shades[(level - 1) % shades.len()];
        scene.rect(&family.square_rect(idx), "none", color);
        scene.rect(&family.shrunk_rect(idx), "none", color);
    }
    scene.finish()
}

/// Quick structural check used by tests: count of rect elements.
pub fn rect_count(svg: &str) -> usize {
    svg.matches("<rect").count()
}
