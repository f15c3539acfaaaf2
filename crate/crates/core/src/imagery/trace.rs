//! Boundary tracing on the pixel-corner lattice.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::st_space::{Contour, Point};

/// Labels the 4-connected components of `bitmap`; returns the component
/// count and a per-pixel component id (0 = background, 1.. = component).
pub fn components4(bitmap: &[bool], width: usize, height: usize) -> (usize, Vec<u32>) {
    let mut ids = vec![0u32; bitmap.len()];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for start in 0..bitmap.len() {
        if !bitmap[start] || ids[start] != 0 {
            continue;
        }
        count += 1;
        ids[start] = count;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % width, i / width);
            let mut visit = |j: usize| {
                if bitmap[j] && ids[j] == 0 {
                    ids[j] = count;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
    }
    (count as usize, ids)
}

/// Traces the outer boundary of a single 4-connected component.
///
/// Boundary edges run along pixel sides with the foreground on the left, so
/// the polygon is counterclockwise in raw `(x, y)` coordinates and its
/// shoelace area equals the pixel count of a hole-free component. Where two
/// foreground pixels touch only diagonally the walk turns left, wrapping the
/// current pixel. Collinear runs are merged afterwards.
pub fn trace_contour(bitmap: &[bool], width: usize, height: usize) -> Result<Contour> {
    trace_labeled(bitmap, width, height, 0)
}

pub(crate) fn trace_labeled(
    bitmap: &[bool],
    width: usize,
    height: usize,
    label: u32,
) -> Result<Contour> {
    assert_eq!(bitmap.len(), width * height, "bitmap shape");
    let fg = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < width
            && (y as usize) < height
            && bitmap[y as usize * width + x as usize]
    };
    let pixels = bitmap.iter().filter(|&&b| b).count();
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (usize::MAX, usize::MAX, 0, 0);
    for (i, _) in bitmap.iter().enumerate().filter(|(_, &b)| b) {
        min_x = min_x.min(i % width);
        max_x = max_x.max(i % width);
        min_y = min_y.min(i / width);
        max_y = max_y.max(i / width);
    }
    let bw = if pixels == 0 { 0 } else { max_x + 1 - min_x };
    let bh = if pixels == 0 { 0 } else { max_y + 1 - min_y };
    if bw < 2 || bh < 2 {
        return Err(Error::DegenerateMask {
            label,
            pixels,
            width: bw,
            height: bh,
        });
    }

    // directed boundary edges keyed by start corner
    let mut out_edges: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            if !fg(x, y) {
                continue;
            }
            if !fg(x, y - 1) {
                out_edges.entry((x, y)).or_default().push((1, 0));
            }
            if !fg(x + 1, y) {
                out_edges.entry((x + 1, y)).or_default().push((0, 1));
            }
            if !fg(x, y + 1) {
                out_edges.entry((x + 1, y + 1)).or_default().push((-1, 0));
            }
            if !fg(x - 1, y) {
                out_edges.entry((x, y + 1)).or_default().push((0, -1));
            }
        }
    }

    // top edge of the first pixel in scanline order is on the outer boundary
    let first = bitmap.iter().position(|&b| b).expect("non-empty");
    let start = ((first % width) as i64, (first / width) as i64);
    let mut corner = start;
    let mut dir = (1i64, 0i64);
    let mut path: Vec<((i64, i64), (i64, i64))> = Vec::new();
    loop {
        path.push((corner, dir));
        let next = (corner.0 + dir.0, corner.1 + dir.1);
        let options = &out_edges[&next];
        let left = (-dir.1, dir.0);
        let right = (dir.1, -dir.0);
        let chosen = [left, dir, right]
            .into_iter()
            .find(|d| options.contains(d))
            .expect("boundary edges form closed loops");
        corner = next;
        dir = chosen;
        if corner == start && dir == (1, 0) {
            break;
        }
    }

    // keep only corners where the direction changes
    let n = path.len();
    let vertices: Vec<Point> = (0..n)
        .filter(|&i| path[i].1 != path[(i + n - 1) % n].1)
        .map(|i| Point::new(path[i].0 .0 as f64, path[i].0 .1 as f64))
        .collect();
    Contour::new(vertices)
}
