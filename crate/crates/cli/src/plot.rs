//! SVG overlay of boxes, polytopes and the true trajectory for 2-D runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use polyfilt::geometry::{BoundingBox, HalfSpace};

use crate::run::{read_records, read_trajectory, CliError};

type Pt = [f64; 2];

/// Clips a convex polygon against `ωᵀx <= ν` (Sutherland–Hodgman, one edge).
pub fn clip(poly: &[Pt], h: &HalfSpace) -> Vec<Pt> {
    let s = |p: &Pt| h.omega[0] * p[0] + h.omega[1] * p[1] - h.nu;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for (i, cur) in poly.iter().enumerate() {
        let prev = &poly[(i + poly.len() - 1) % poly.len()];
        let (sc, sp) = (s(cur), s(prev));
        // strict crossings only, so vertices on the line are not duplicated
        if (sc < 0.0 && sp > 0.0) || (sc > 0.0 && sp < 0.0) {
            let t = sp / (sp - sc);
            out.push([
                prev[0] + t * (cur[0] - prev[0]),
                prev[1] + t * (cur[1] - prev[1]),
            ]);
        }
        if sc <= 0.0 {
            out.push(*cur);
        }
    }
    out
}

/// Vertices of the box intersected with every half-space, counter-clockwise.
pub fn polygon(bx: &BoundingBox, halfspaces: &[HalfSpace]) -> Vec<Pt> {
    let (l, u) = (&bx.lower, &bx.upper);
    let mut poly = vec![[l[0], l[1]], [u[0], l[1]], [u[0], u[1]], [l[0], u[1]]];
    for h in halfspaces {
        poly = clip(&poly, h);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

struct Frame {
    lo: Pt,
    scale: f64,
    height: f64,
}

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;

impl Frame {
    fn new(points: impl Iterator<Item = Pt>) -> Frame {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for i in 0..2 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let scale = (SIZE - 2.0 * MARGIN) / span;
        Frame {
            lo,
            scale,
            height: (hi[1] - lo[1]) * scale,
        }
    }

    fn map(&self, p: &Pt) -> (f64, f64) {
        let x = MARGIN + (p[0] - self.lo[0]) * self.scale;
        let y = MARGIN + self.height - (p[1] - self.lo[1]) * self.scale;
        (x, y)
    }

    fn path(&self, pts: &[Pt]) -> String {
        pts.iter()
            .map(|p| {
                let (x, y) = self.map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn render(boxes: &[BoundingBox], polytopes: &[Vec<Pt>], truth: Option<&[Vec<f64>]>) -> String {
    let corners = boxes
        .iter()
        .flat_map(|b| [[b.lower[0], b.lower[1]], [b.upper[0], b.upper[1]]]);
    let truth_pts: Vec<Pt> = truth.unwrap_or(&[]).iter().map(|x| [x[0], x[1]]).collect();
    let frame = Frame::new(corners.chain(truth_pts.iter().copied()));
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for b in boxes {
        let rect = [
            [b.lower[0], b.lower[1]],
            [b.upper[0], b.lower[1]],
            [b.upper[0], b.upper[1]],
            [b.lower[0], b.upper[1]],
        ];
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="none" stroke="gray" stroke-width="0.8" stroke-dasharray="4 3"/>"#,
            frame.path(&rect)
        );
    }
    for p in polytopes.iter().filter(|p| p.len() >= 3) {
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="steelblue" fill-opacity="0.25" stroke="navy" stroke-width="1"/>"#,
            frame.path(p)
        );
    }
    if truth_pts.len() >= 2 {
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="crimson" stroke-width="1.5"/>"#,
            frame.path(&truth_pts)
        );
    }
    for p in &truth_pts {
        let (x, y) = frame.map(p);
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="crimson"/>"#
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn plot(out: &Path) -> Result<(), CliError> {
    let records = read_records(out)?;
    if let Some(r) = records.iter().find(|r| r.bounding_box.dim() != 2) {
        return Err(CliError::Config(format!(
            "plot needs a 2-D state, step {} has {} dimensions",
            r.step,
            r.bounding_box.dim()
        )));
    }
    let boxes: Vec<BoundingBox> = records.iter().map(|r| r.bounding_box.clone()).collect();
    let polys: Vec<Vec<Pt>> = records
        .iter()
        .map(|r| polygon(&r.bounding_box, r.polytope.halfspaces()))
        .collect();
    let truth = read_trajectory(out)?;
    let svg = render(&boxes, &polys, truth.as_ref().map(|t| t.states.as_slice()));
    let path = out.join("plot.svg");
    fs::write(&path, svg).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}
