//! SVG overlays for visual debugging: mask silhouette, skeleton and object
//! wireframes, and all 26 labeled node markers. SVG keeps golden tests
//! exact and needs no image dependencies.

use crate::features::KeypointSet;
use crate::geometry::RasterMask;
use crate::hograph::{node_name, nodes, HUMAN_SKELETON_EDGES, N_HUMAN, OBJECT_CYCLE};

const HUMAN_COLOR: &str = "#2b6cb0";
const OBJECT_COLOR: &str = "#c05621";
const MASK_COLOR: &str = "#718096";

fn push_line(out: &mut String, a: [f64; 2], b: [f64; 2], color: &str) {
    out.push_str(&format!(
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"1\"/>\n",
        a[0], a[1], b[0], b[1]
    ));
}

fn push_marker(out: &mut String, p: [f64; 2], color: &str, label: &str) {
    out.push_str(&format!(
        "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.2\" fill=\"{color}\"/>\n",
        p[0], p[1]
    ));
    out.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"5\" fill=\"{color}\">{label}</text>\n",
        p[0] + 3.0,
        p[1] - 2.0
    ));
}

/// One human-object pair over the object mask, as a standalone SVG document.
pub fn render_pair_svg(mask: &RasterMask, kps: &KeypointSet) -> String {
    let (w, h) = (mask.width(), mask.height());
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" \
         width=\"{w}\" height=\"{h}\">\n  <rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n"
    );

    // Mask silhouette as one rectangle per vertical run of occupied pixels.
    for x in 0..w {
        let mut y = 0;
        while y < h {
            if mask.is_occupied(x as i64, y as i64) {
                let start = y;
                while y < h && mask.is_occupied(x as i64, y as i64) {
                    y += 1;
                }
                out.push_str(&format!(
                    "  <rect x=\"{x}\" y=\"{start}\" width=\"1\" height=\"{}\" \
                     fill=\"{MASK_COLOR}\" fill-opacity=\"0.35\"/>\n",
                    y - start
                ));
            } else {
                y += 1;
            }
        }
    }

    let [bx0, by0, bx1, by1] = kps.human_bbox;
    out.push_str(&format!(
        "  <rect x=\"{bx0:.2}\" y=\"{by0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" \
         stroke=\"{HUMAN_COLOR}\" stroke-dasharray=\"4 3\"/>\n",
        bx1 - bx0,
        by1 - by0
    ));

    let object = kps.object.points();
    for &(a, b) in &HUMAN_SKELETON_EDGES {
        push_line(&mut out, kps.human[a], kps.human[b], HUMAN_COLOR);
    }
    for i in 0..OBJECT_CYCLE.len() {
        let a = object[OBJECT_CYCLE[i] - N_HUMAN];
        let b = object[OBJECT_CYCLE[(i + 1) % OBJECT_CYCLE.len()] - N_HUMAN];
        push_line(&mut out, a, b, OBJECT_COLOR);
        push_line(
            &mut out,
            object[nodes::OBJ_GRAVITY - N_HUMAN],
            a,
            OBJECT_COLOR,
        );
    }

    for (i, &p) in kps.human.iter().enumerate() {
        push_marker(&mut out, p, HUMAN_COLOR, node_name(i));
    }
    for (i, &p) in object.iter().enumerate() {
        push_marker(&mut out, p, OBJECT_COLOR, node_name(N_HUMAN + i));
    }

    out.push_str("</svg>\n");
    out
}
