//! SVG drawings of network states and continuum fields.
//!
//! The leaf's `x` axis points down the page and `y` to the right. Edge width
//! is affine in the transport activity, `w_min + (w_max - w_min) X / max X`,
//! and both edges and vertices are colored with a sequential map (edges by
//! `X / max X`, vertices by `a / max a`).

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::continuum::ContinuumField;
use crate::dynamics::NetworkState;
use crate::error::Result;
use crate::grid::Graph;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colormap {
    #[default]
    Viridis,
    Greys,
}

// viridis sampled at 0, 1/8, ..., 1
const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

impl Colormap {
    /// `#rrggbb` for `t` clamped to `[0, 1]`.
    pub fn color(&self, t: f64) -> String {
        let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
        let rgb = match self {
            Colormap::Viridis => {
                let s = t * (VIRIDIS.len() - 1) as f64;
                let k = (s.floor() as usize).min(VIRIDIS.len() - 2);
                let f = s - k as f64;
                let (lo, hi) = (VIRIDIS[k], VIRIDIS[k + 1]);
                [0, 1, 2].map(|c| lo[c] + f * (hi[c] - lo[c]))
            }
            // white to black
            Colormap::Greys => [255.0 * (1.0 - t); 3],
        };
        let [r, g, b] = rgb.map(|v| v.round() as u8);
        format!("#{r:02x}{g:02x}{b:02x}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    /// Width of the drawing area in pixels; the height follows the aspect
    /// ratio of the graph.
    pub width: f64,
    pub margin: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// Skip edges with `X == 0` instead of drawing them at `w_min`.
    pub omit_zero: bool,
    /// Vertex radius; `0` hides the vertices.
    pub vertex_radius: f64,
    pub colormap: Colormap,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            width: 480.0,
            margin: 16.0,
            w_min: 0.5,
            w_max: 8.0,
            omit_zero: false,
            vertex_radius: 5.0,
            colormap: Colormap::Viridis,
        }
    }
}

fn max_or_zero(v: &[f64]) -> f64 {
    v.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max)
}

/// Stroke width of an edge with activity `x` when the largest activity is
/// `x_max`.
pub fn stroke_width(x: f64, x_max: f64, opts: &RenderOptions) -> f64 {
    if x_max > 0.0 {
        opts.w_min + (opts.w_max - opts.w_min) * (x.max(0.0) / x_max)
    } else {
        opts.w_min
    }
}

struct Frame {
    x_min: f64,
    y_min: f64,
    scale: f64,
    margin: f64,
    width: f64,
    height: f64,
}

impl Frame {
    // page coordinates: leaf y to the right, leaf x downwards
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, opts: &RenderOptions) -> Self {
        let span_y = (y_max - y_min).max(f64::MIN_POSITIVE);
        let span_x = (x_max - x_min).max(0.0);
        let scale = opts.width / span_y;
        Self {
            x_min,
            y_min,
            scale,
            margin: opts.margin,
            width: opts.width + 2.0 * opts.margin,
            height: span_x * scale + 2.0 * opts.margin,
        }
    }

    fn page(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.margin + (y - self.y_min) * self.scale,
            self.margin + (x - self.x_min) * self.scale,
        )
    }

    fn open(&self, out: &mut String) {
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.3} {:.3}">"#,
            self.width.ceil(),
            self.height.ceil(),
            self.width,
            self.height
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    }
}

/// Draws `st` on `g`. Output depends only on the inputs.
pub fn render_svg(g: &Graph, st: &NetworkState, opts: &RenderOptions) -> Result<String> {
    st.check_dims(g)?;
    let b = g.bounding_box();
    let frame = Frame::new(b.x_min, b.x_max, b.y_min, b.y_max, opts);
    let x_max = max_or_zero(&st.x);
    let a_max = max_or_zero(&st.a);
    let mut out = String::new();
    frame.open(&mut out);
    let _ = writeln!(out, r#"<g stroke-linecap="round">"#);
    // thin edges first so strong veins stay on top
    let mut order: Vec<usize> = (0..g.num_edges()).collect();
    order.sort_by(|&p, &q| st.x[p].total_cmp(&st.x[q]).then(p.cmp(&q)));
    for k in order {
        let x = st.x[k];
        if opts.omit_zero && x == 0.0 {
            continue;
        }
        let e = g.edges()[k];
        let (x1, y1) = frame.page(g.position(e.i).0, g.position(e.i).1);
        let (x2, y2) = frame.page(g.position(e.j).0, g.position(e.j).1);
        let t = if x_max > 0.0 { x / x_max } else { 0.0 };
        let _ = writeln!(
            out,
            r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="{}" stroke-width="{:.3}"/>"#,
            opts.colormap.color(t),
            stroke_width(x, x_max, opts)
        );
    }
    let _ = writeln!(out, "</g>");
    if opts.vertex_radius > 0.0 {
        let _ = writeln!(out, r#"<g stroke="black" stroke-width="0.5">"#);
        for v in g.vertices() {
            let (cx, cy) = frame.page(v.x, v.y);
            let t = if a_max > 0.0 { st.a[v.id] / a_max } else { 0.0 };
            let _ = writeln!(
                out,
                r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="{}"/>"#,
                opts.vertex_radius,
                opts.colormap.color(t)
            );
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Heat map of the auxin density with the cell-averaged transport tensor
/// `(X1 + X2) / 2` drawn as inset squares.
pub fn render_field_svg(f: &ContinuumField, opts: &RenderOptions) -> Result<String> {
    f.validate()?;
    let g = &f.grid;
    let frame = Frame::new(g.x0, g.x0 + g.lx, g.y0, g.y0 + g.ly, opts);
    let (t1, t2) = f.cell_tensor();
    let tr: Vec<f64> = t1.iter().zip(&t2).map(|(p, q)| 0.5 * (p + q)).collect();
    let a_max = max_or_zero(&f.a);
    let x_max = max_or_zero(&tr);
    let (w, h) = (g.h2() * frame.scale, g.h1() * frame.scale);
    let mut out = String::new();
    frame.open(&mut out);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            let (px, py) = frame.page(g.x0 + i as f64 * g.h1(), g.y0 + j as f64 * g.h2());
            let ta = if a_max > 0.0 { f.a[c] / a_max } else { 0.0 };
            let _ = writeln!(
                out,
                r#"<rect x="{px:.3}" y="{py:.3}" width="{w:.3}" height="{h:.3}" fill="{}"/>"#,
                opts.colormap.color(ta)
            );
            if x_max > 0.0 {
                let s = (tr[c] / x_max).sqrt();
                let (iw, ih) = (0.8 * s * w, 0.8 * s * h);
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.3}" y="{:.3}" width="{iw:.3}" height="{ih:.3}" fill="none" stroke="white" stroke-width="0.5"/>"#,
                    px + 0.5 * (w - iw),
                    py + 0.5 * (h - ih)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_diamond, BBox};

    fn widths(svg: &str) -> Vec<String> {
        svg.lines()
            .filter(|l| l.starts_with("<line"))
            .map(|l| l.split("stroke-width=\"").nth(1).unwrap().split('"').next().unwrap().to_string())
            .collect()
    }

    #[test]
    fn colormap_ends() {
        assert_eq!(Colormap::Viridis.color(0.0), "#440154");
        assert_eq!(Colormap::Viridis.color(1.0), "#fde725");
        assert_eq!(Colormap::Viridis.color(7.0), "#fde725");
        assert_eq!(Colormap::Greys.color(0.0), "#ffffff");
        assert_eq!(Colormap::Greys.color(f64::NAN), "#ffffff");
    }

    #[test]
    fn equal_activity_equal_width() {
        let g = build_diamond(3, 3, BBox::leaf()).unwrap();
        let st = NetworkState::uniform(&g, 1.0, 2.5);
        let svg = render_svg(&g, &st, &RenderOptions::default()).unwrap();
        let w = widths(&svg);
        assert_eq!(w.len(), g.num_edges());
        assert!(w.iter().all(|v| v == "8.000"));
        assert_eq!(svg.matches("<circle").count(), 9);
    }

    #[test]
    fn zero_edges() {
        let g = build_diamond(3, 3, BBox::leaf()).unwrap();
        let mut st = NetworkState::uniform(&g, 1.0, 1.0);
        st.x[0] = 0.0;
        st.x[3] = 0.5;
        let svg = render_svg(&g, &st, &RenderOptions::default()).unwrap();
        let w = widths(&svg);
        // sorted by activity: the zero edge first
        assert_eq!(w[0], "0.500");
        assert_eq!(w[1], "4.250");
        let opts = RenderOptions {
            omit_zero: true,
            ..RenderOptions::default()
        };
        assert_eq!(widths(&render_svg(&g, &st, &opts).unwrap()).len(), g.num_edges() - 1);
        let none = NetworkState::uniform(&g, 0.0, 0.0);
        assert!(widths(&render_svg(&g, &none, &RenderOptions::default()).unwrap())
            .iter()
            .all(|v| v == "0.500"));
    }

    #[test]
    fn deterministic_and_oriented() {
        let g = build_diamond(5, 5, BBox::leaf()).unwrap();
        let mut st = NetworkState::uniform(&g, 1.0, 1.0);
        st.a[0] = 3.0;
        let o = RenderOptions::default();
        assert_eq!(render_svg(&g, &st, &o).unwrap(), render_svg(&g, &st, &o).unwrap());
        // the tip (smallest x) is drawn at the top, centered
        let svg = render_svg(&g, &st, &o).unwrap();
        let first = svg.lines().find(|l| l.starts_with("<circle")).unwrap();
        assert!(first.contains(r#"cx="256.000" cy="16.000""#), "{first}");
    }
}
