//! Deterministic SVG pictures of forests and Harris walks.

use std::fmt::Write;

use bforest_core::forest::{
    forest_to_walk, AlternatingWalk, Color, ForestError, PlaneForest, PlaneTree,
};

const MARGIN: f64 = 20.0;

pub struct Canvas {
    pub width: f64,
    pub height: f64,
}

struct Line {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    stroke: &'static str,
}

fn stroke(c: Option<Color>) -> &'static str {
    match c {
        Some(Color::Red) => "#c0392b",
        _ => "#000000",
    }
}

/// Branch segments in model coordinates: x is the depth-first time at which
/// a leaf is reached, an inner vertex sits midway between its children, y
/// is height above the floor.
fn forest_lines(forest: &PlaneForest) -> (Vec<Line>, f64, f64) {
    fn place(t: &PlaneTree, i: usize, base: f64, clock: &mut f64, out: &mut Vec<Line>) -> f64 {
        let n = t.node(i);
        let top = base + n.length;
        *clock += n.length;
        let x = match t.children(i) {
            None => *clock,
            Some((l, r)) => {
                let xl = place(t, l, top, clock, out);
                let xr = place(t, r, top, clock, out);
                out.push(Line {
                    x1: xl,
                    y1: top,
                    x2: xr,
                    y2: top,
                    stroke: stroke(n.color),
                });
                0.5 * (xl + xr)
            }
        };
        *clock += n.length;
        out.push(Line {
            x1: x,
            y1: base,
            x2: x,
            y2: top,
            stroke: stroke(n.color),
        });
        x
    }
    let mut out = Vec::new();
    let mut clock = 0.0;
    let mut ymax: f64 = 0.0;
    for e in forest.entries() {
        clock += e.gap;
        if e.tree.node_count() > 0 {
            place(&e.tree, 0, 0.0, &mut clock, &mut out);
            ymax = ymax.max(e.tree.height());
        }
    }
    let xmax = clock + forest.tail_gap().unwrap_or(0.0);
    (out, xmax, ymax)
}

/// Vertices of the walk drawn with slopes of +-1.
fn walk_points(walk: &AlternatingWalk) -> Vec<(f64, f64)> {
    let h = walk.heights();
    let mut x = 0.0;
    let mut pts = Vec::with_capacity(h.len());
    for (k, &y) in h.iter().enumerate() {
        if k > 0 {
            x += (y - h[k - 1]).abs();
        }
        pts.push((x, y));
    }
    pts
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    /// Pixel box: left, top, width, height.
    px: (f64, f64, f64, f64),
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (l, t, w, h) = self.px;
        let sx = if self.x1 > self.x0 {
            w / (self.x1 - self.x0)
        } else {
            0.0
        };
        let sy = if self.y1 > self.y0 {
            h / (self.y1 - self.y0)
        } else {
            0.0
        };
        (l + (x - self.x0) * sx, t + h - (y - self.y0) * sy)
    }
}

fn header(c: &Canvas) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n",
        w = c.width,
        h = c.height
    )
}

fn line(svg: &mut String, f: &Frame, l: &Line, width: f64) {
    let (a, b) = f.map(l.x1, l.y1);
    let (c, d) = f.map(l.x2, l.y2);
    writeln!(
        svg,
        "<line x1=\"{a:.3}\" y1=\"{b:.3}\" x2=\"{c:.3}\" y2=\"{d:.3}\" stroke=\"{}\" stroke-width=\"{width}\"/>",
        l.stroke
    )
    .unwrap();
}

fn floor(svg: &mut String, f: &Frame) {
    let l = Line {
        x1: f.x0,
        y1: 0.0,
        x2: f.x1,
        y2: 0.0,
        stroke: "#7f7f7f",
    };
    line(svg, f, &l, 1.0);
}

fn polyline(svg: &mut String, f: &Frame, pts: &[(f64, f64)]) {
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| {
            let (a, b) = f.map(x, y);
            format!("{a:.3},{b:.3}")
        })
        .collect();
    writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"1\"/>",
        coords.join(" ")
    )
    .unwrap();
}

fn frame_for(x1: f64, y0: f64, y1: f64, px: (f64, f64, f64, f64)) -> Frame {
    Frame {
        x0: 0.0,
        x1: x1.max(1e-12),
        y0,
        y1: y1.max(y0 + 1e-12),
        px,
    }
}

/// The forest above its floor; with `harris`, its Harris walk underneath on
/// the same time axis.
pub fn forest_svg(forest: &PlaneForest, harris: bool, c: &Canvas) -> Result<String, ForestError> {
    let (lines, xmax, ymax) = forest_lines(forest);
    let w = c.width - 2.0 * MARGIN;
    let mut svg = header(c);
    if harris && !forest.is_empty() {
        let pts = walk_points(&forest_to_walk(forest)?);
        let xw = pts.last().map_or(0.0, |p| p.0);
        let lo = pts.iter().fold(0.0f64, |m, p| m.min(p.1));
        let hi = pts.iter().fold(0.0f64, |m, p| m.max(p.1));
        let half = 0.5 * (c.height - 3.0 * MARGIN);
        let x1 = xmax.max(xw);
        let top = frame_for(x1, 0.0, ymax, (MARGIN, MARGIN, w, half));
        floor(&mut svg, &top);
        for l in &lines {
            line(&mut svg, &top, l, 1.5);
        }
        let bottom = frame_for(x1, lo, hi, (MARGIN, 2.0 * MARGIN + half, w, half));
        floor(&mut svg, &bottom);
        polyline(&mut svg, &bottom, &pts);
    } else {
        let f = frame_for(
            xmax,
            0.0,
            ymax,
            (MARGIN, MARGIN, w, c.height - 2.0 * MARGIN),
        );
        floor(&mut svg, &f);
        for l in &lines {
            line(&mut svg, &f, l, 1.5);
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn walk_svg(walk: &AlternatingWalk, c: &Canvas) -> String {
    let pts = walk_points(walk);
    let xw = pts.last().map_or(0.0, |p| p.0);
    let lo = pts.iter().fold(0.0f64, |m, p| m.min(p.1));
    let hi = pts.iter().fold(0.0f64, |m, p| m.max(p.1));
    let f = frame_for(
        xw,
        lo,
        hi,
        (
            MARGIN,
            MARGIN,
            c.width - 2.0 * MARGIN,
            c.height - 2.0 * MARGIN,
        ),
    );
    let mut svg = header(c);
    floor(&mut svg, &f);
    polyline(&mut svg, &f, &pts);
    svg.push_str("</svg>\n");
    svg
}
