//! Unit positions: square grids, circle packing, and banded group layouts.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
    pub padding: f64,
}

impl Default for Canvas {
    fn default() -> Self {
        Canvas {
            width: 800.0,
            height: 500.0,
            padding: 20.0,
        }
    }
}

impl Canvas {
    pub fn inner(&self) -> Rect {
        Rect {
            x0: self.padding,
            y0: self.padding,
            x1: self.width - self.padding,
            y1: self.height - self.padding,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> Point {
        Point {
            x: (self.x0 + self.x1) / 2.0,
            y: (self.y0 + self.y1) / 2.0,
        }
    }
}

/// Grid positions and the radius actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub positions: Vec<Point>,
    pub radius: f64,
}

/// Largest radius (up to `max_radius`) at which an `n`-unit grid fits `rect`.
pub fn grid_radius(n: usize, rect: Rect, max_radius: f64) -> f64 {
    if n == 0 {
        return max_radius;
    }
    let cols = (n as f64).sqrt().ceil();
    let rows = (n as f64 / cols).ceil();
    // width = cols*2r + (cols-1)*r/2
    let fit_w = rect.width() / (2.0 * cols + 0.5 * (cols - 1.0));
    let fit_h = rect.height() / (2.0 * rows + 0.5 * (rows - 1.0));
    max_radius.min(fit_w).min(fit_h).max(0.0)
}

/// Row-major grid with `ceil(sqrt(n))` columns and a gap of half the radius,
/// centered in `rect`. The radius shrinks when the grid would not fit.
pub fn grid_in(n: usize, rect: Rect, radius: f64) -> GridLayout {
    let r = grid_radius(n, rect, radius);
    if n == 0 {
        return GridLayout {
            positions: Vec::new(),
            radius: r,
        };
    }
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let pitch = 2.0 * r + r / 2.0;
    let block_w = cols as f64 * 2.0 * r + (cols - 1) as f64 * r / 2.0;
    let block_h = rows as f64 * 2.0 * r + (rows - 1) as f64 * r / 2.0;
    let c = rect.center();
    let left = c.x - block_w / 2.0 + r;
    let top = c.y - block_h / 2.0 + r;
    let positions = (0..n)
        .map(|i| Point {
            x: left + (i % cols) as f64 * pitch,
            y: top + (i / cols) as f64 * pitch,
        })
        .collect();
    GridLayout {
        positions,
        radius: r,
    }
}

pub fn layout_grid(n: usize, canvas: &Canvas, unit_radius: f64) -> GridLayout {
    grid_in(n, canvas.inner(), unit_radius)
}

/// Placed circles bucketed on a square grid whose cells are as wide as the
/// largest possible center distance of two touching circles.
type CellMap = HashMap<(i64, i64), Vec<(Point, f64)>, BuildHasherDefault<CellHasher>>;

struct Placed {
    cell: f64,
    buckets: CellMap,
}

/// Multiplicative hash for small integer cell keys.
#[derive(Default)]
struct CellHasher(u64);

impl Hasher for CellHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.write_u64(u64::from(b));
        }
    }

    fn write_i64(&mut self, x: i64) {
        self.write_u64(x as u64);
    }

    fn write_u64(&mut self, x: u64) {
        self.0 = (self.0.rotate_left(5) ^ x).wrapping_mul(0x51_7c_c1_b7_27_22_0a_95);
    }
}

impl Placed {
    fn new(r_max: f64) -> Self {
        Placed {
            cell: (2.0 * r_max).max(1e-6),
            buckets: Default::default(),
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
        )
    }

    fn insert(&mut self, p: Point, r: f64) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push((p, r));
    }

    /// Signed clearance of a circle at `p` against its neighbours. Negative
    /// values are exact overlap depths; any overlapping circle lies in the
    /// 3x3 neighbourhood, so a non-negative result means no overlap at all.
    fn clearance(&self, p: Point, r: f64) -> f64 {
        let (i, j) = self.key(p);
        let mut best = f64::INFINITY;
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(b) = self.buckets.get(&(i + di, j + dj)) {
                    for (c, rc) in b {
                        best = best.min((p.x - c.x).hypot(p.y - c.y) - (r + rc));
                    }
                }
            }
        }
        best
    }
}

fn spiral(a: f64, t: f64) -> Point {
    Point {
        x: a * t * t.cos(),
        y: a * t * t.sin(),
    }
}

/// Deterministic circle packing.
///
/// Circles are placed largest first (ties by `ids`), the first at the origin
/// and each next one at the first point of an Archimedean spiral where it no
/// longer overlaps anything placed, refined by bisection to the touching
/// point. The result is centered in the canvas and scaled down (positions and
/// radii together) when it would not fit. Returns positions and radii in the
/// input order.
pub fn layout_pack(radii: &[f64], ids: &[u32], canvas: &Canvas) -> (Vec<Point>, Vec<f64>) {
    if radii.is_empty() {
        return (Vec::new(), Vec::new());
    }
    fit_into(&pack_raw(radii, ids), radii, canvas.inner())
}

/// Packing around the origin, before any centering or scaling.
pub fn pack_raw(radii: &[f64], ids: &[u32]) -> Vec<Point> {
    let n = radii.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        radii[j]
            .total_cmp(&radii[i])
            .then_with(|| ids.get(i).cmp(&ids.get(j)))
    });
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let mut placed = Placed::new(r_max);
    let mut pos = vec![Point { x: 0.0, y: 0.0 }; n];
    for (rank, &i) in order.iter().enumerate() {
        let r = radii[i].max(1e-6);
        // one spiral turn advances by the radius being placed
        let a = r / (2.0 * std::f64::consts::PI);
        if rank == 0 {
            placed.insert(pos[i], r);
            continue;
        }
        let mut t = 0.0;
        let mut t_lo = 0.0;
        loop {
            let c = placed.clearance(spiral(a, t), r);
            if c >= 0.0 {
                break;
            }
            t_lo = t;
            // Moving an arc length of -c cannot clear the overlap, so skip it.
            let depth = -c;
            let speed = a * (1.0 + t * t).sqrt();
            t += depth.max(0.02 * r) / (speed + depth.max(0.02 * r));
        }
        let mut t_hi = t;
        for _ in 0..60 {
            let mid = 0.5 * (t_lo + t_hi);
            if placed.clearance(spiral(a, mid), r) >= 0.0 {
                t_hi = mid;
            } else {
                t_lo = mid;
            }
        }
        pos[i] = spiral(a, t_hi);
        placed.insert(pos[i], r);
    }
    pos
}

/// Bounding box of a set of circles.
pub fn bounds(pos: &[Point], radii: &[f64]) -> Rect {
    let mut b = Rect {
        x0: f64::INFINITY,
        y0: f64::INFINITY,
        x1: f64::NEG_INFINITY,
        y1: f64::NEG_INFINITY,
    };
    for (p, r) in pos.iter().zip(radii) {
        b.x0 = b.x0.min(p.x - r);
        b.y0 = b.y0.min(p.y - r);
        b.x1 = b.x1.max(p.x + r);
        b.y1 = b.y1.max(p.y + r);
    }
    b
}

/// Centers a set of circles in `rect`, scaling down when needed.
pub fn fit_into(pos: &[Point], radii: &[f64], rect: Rect) -> (Vec<Point>, Vec<f64>) {
    let b = bounds(pos, radii);
    let scale = (rect.width() / b.width())
        .min(rect.height() / b.height())
        .min(1.0);
    place(pos, radii, b, rect, scale)
}

/// Maps circles with bounding box `b` onto the center of `rect` at `scale`.
pub fn place(
    pos: &[Point],
    radii: &[f64],
    b: Rect,
    rect: Rect,
    scale: f64,
) -> (Vec<Point>, Vec<f64>) {
    let (bc, c) = (b.center(), rect.center());
    let pos = pos
        .iter()
        .map(|p| Point {
            x: c.x + (p.x - bc.x) * scale,
            y: c.y + (p.y - bc.y) * scale,
        })
        .collect();
    (pos, radii.iter().map(|r| r * scale).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// One labelled slice of an axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub label: String,
    pub start: f64,
    pub end: f64,
}

/// Splits `[start, end]` into `n` equal bands.
pub fn bands(labels: &[String], start: f64, end: f64) -> Vec<Band> {
    let n = labels.len().max(1) as f64;
    let w = (end - start) / n;
    labels
        .iter()
        .enumerate()
        .map(|(i, label)| Band {
            label: label.clone(),
            start: start + i as f64 * w,
            end: if i + 1 == labels.len() {
                end
            } else {
                start + (i + 1) as f64 * w
            },
        })
        .collect()
}

/// Room kept for band labels beside the plot area.
pub const X_LABEL_STRIP: f64 = 24.0;
pub const Y_LABEL_STRIP: f64 = 72.0;

/// Plot area left once the label strips for bound axes are reserved.
pub fn plot_area(canvas: &Canvas, x_bound: bool, y_bound: bool) -> Rect {
    let mut r = canvas.inner();
    if x_bound {
        r.y1 -= X_LABEL_STRIP;
    }
    if y_bound {
        r.x0 += Y_LABEL_STRIP;
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedLayout {
    /// Position of every member, cell by cell.
    pub positions: Vec<(u32, Point)>,
    pub radius: f64,
    pub x_bands: Vec<Band>,
    pub y_bands: Vec<Band>,
}

/// Bands for the bound axes and the cell rectangles between them, row-major
/// (`j * nx + i`). With no axis bound there is one cell: the whole plot area.
pub fn cell_rects(
    x_labels: Option<&[String]>,
    y_labels: Option<&[String]>,
    canvas: &Canvas,
) -> (Vec<Band>, Vec<Band>, Vec<Rect>) {
    let area = plot_area(canvas, x_labels.is_some(), y_labels.is_some());
    let x_bands = x_labels
        .map(|l| bands(l, area.x0, area.x1))
        .unwrap_or_default();
    let y_bands = y_labels
        .map(|l| bands(l, area.y0, area.y1))
        .unwrap_or_default();
    let grouped = !x_bands.is_empty() || !y_bands.is_empty();
    let mut cells = Vec::new();
    for j in 0..y_bands.len().max(1) {
        for i in 0..x_bands.len().max(1) {
            let r = Rect {
                x0: x_bands.get(i).map(|b| b.start).unwrap_or(area.x0),
                x1: x_bands.get(i).map(|b| b.end).unwrap_or(area.x1),
                y0: y_bands.get(j).map(|b| b.start).unwrap_or(area.y0),
                y1: y_bands.get(j).map(|b| b.end).unwrap_or(area.y1),
            };
            // Inset grouped cells a little so neighbouring bands do not touch.
            let m = if grouped {
                (r.width().min(r.height()) * 0.05).min(6.0)
            } else {
                0.0
            };
            cells.push(Rect {
                x0: r.x0 + m,
                y0: r.y0 + m,
                x1: r.x1 - m,
                y1: r.y1 - m,
            });
        }
    }
    (x_bands, y_bands, cells)
}

/// Grids per cell with one shared radius. `cell_of` maps a unit to its cell
/// index as laid out by [`cell_rects`].
pub fn layout_cells(
    units: &[u32],
    cell_of: &dyn Fn(u32) -> usize,
    cells: &[Rect],
    unit_radius: f64,
) -> (Vec<(u32, Point)>, f64) {
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); cells.len()];
    for &u in units {
        members[cell_of(u)].push(u);
    }
    let radius = members
        .iter()
        .zip(cells)
        .filter(|(m, _)| !m.is_empty())
        .map(|(m, r)| grid_radius(m.len(), *r, unit_radius))
        .fold(unit_radius, f64::min);
    let mut positions = Vec::with_capacity(units.len());
    for (m, r) in members.iter().zip(cells) {
        let g = grid_in(m.len(), *r, radius);
        positions.extend(m.iter().copied().zip(g.positions));
    }
    (positions, radius)
}

/// Bands along one axis, one per group in the given order, each holding a
/// grid of its members.
pub fn layout_grouped(
    groups: &[(String, Vec<u32>)],
    axis: Axis,
    canvas: &Canvas,
    unit_radius: f64,
) -> GroupedLayout {
    let labels: Vec<String> = groups.iter().map(|(l, _)| l.clone()).collect();
    let (x_bands, y_bands, cells) = match axis {
        Axis::X => cell_rects(Some(&labels), None, canvas),
        Axis::Y => cell_rects(None, Some(&labels), canvas),
    };
    let mut band_of = std::collections::HashMap::new();
    let mut units = Vec::new();
    for (i, (_, members)) in groups.iter().enumerate() {
        for &m in members {
            band_of.insert(m, i);
            units.push(m);
        }
    }
    let (positions, radius) = layout_cells(&units, &|u| band_of[&u], &cells, unit_radius);
    GroupedLayout {
        positions,
        radius,
        x_bands,
        y_bands,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_units_form_a_centered_square() {
        let c = Canvas::default();
        let g = layout_grid(9, &c, 10.0);
        let cx: f64 = g.positions.iter().map(|p| p.x).sum::<f64>() / 9.0;
        let cy: f64 = g.positions.iter().map(|p| p.y).sum::<f64>() / 9.0;
        assert!((cx - 400.0).abs() < 1e-9 && (cy - 250.0).abs() < 1e-9);
        assert_eq!(g.positions[4], Point { x: 400.0, y: 250.0 });
    }

    #[test]
    fn ten_units_use_four_columns() {
        let g = layout_grid(10, &Canvas::default(), 10.0);
        let xs: std::collections::BTreeSet<i64> =
            g.positions.iter().map(|p| p.x.round() as i64).collect();
        let ys: std::collections::BTreeSet<i64> =
            g.positions.iter().map(|p| p.y.round() as i64).collect();
        assert_eq!((xs.len(), ys.len()), (4, 3));
        // block of 4 columns, pitch 25, width 95: centered on 400
        assert_eq!(g.positions[0].x, 400.0 - 47.5 + 10.0);
        assert_eq!(g.positions[9].y, g.positions[8].y);
    }

    #[test]
    fn two_equal_circles_touch() {
        let (p, r) = layout_pack(&[5.0, 5.0], &[0, 1], &Canvas::default());
        let d = (p[0].x - p[1].x).hypot(p[0].y - p[1].y);
        assert!((d - 10.0).abs() < 1e-6, "{d}");
        assert_eq!(r, vec![5.0, 5.0]);
    }

    #[test]
    fn bands_partition_exactly() {
        let b = bands(&["a".into(), "b".into(), "c".into()], 0.0, 90.0);
        assert_eq!(b[0].start, 0.0);
        assert_eq!(b[2].end, 90.0);
        assert_eq!(b[1].start, b[0].end);
    }
}
