use super::{ObjectSpec, Shape};

// Unit-circumradius vertex tables, pointing up (y grows downward).
const TRIANGLE: [(f64, f64); 3] = [(0.0, -1.0), (0.8660254037844387, 0.5), (-0.8660254037844387, 0.5)];

const HEXAGON: [(f64, f64); 6] = [
    (0.0, -1.0),
    (0.8660254037844387, -0.5),
    (0.8660254037844387, 0.5),
    (0.0, 1.0),
    (-0.8660254037844387, 0.5),
    (-0.8660254037844387, -0.5),
];

// Regular five-pointed star, inner radius sin(18°)/sin(54°).
const STAR: [(f64, f64); 10] = [
    (0.0, -1.0),
    (0.22451398828979266, -0.3090169943749474),
    (0.9510565162951535, -0.3090169943749474),
    (0.3632712640026804, 0.11803398874989482),
    (0.5877852522924731, 0.8090169943749475),
    (0.0, 0.3819660112501051),
    (-0.587785252292473, 0.8090169943749475),
    (-0.3632712640026804, 0.11803398874989486),
    (-0.9510565162951536, -0.3090169943749473),
    (-0.2245139882897927, -0.30901699437494734),
];

// Half extents of a 2:1 rectangle inscribed in the unit circle.
const RECT_HALF_W: f64 = 0.8944271909999159;
const RECT_HALF_H: f64 = 0.4472135954999579;

/// Integer pixel footprint of one object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Footprint {
    Disk { cx: i64, cy: i64, r: i64 },
    /// Half-open box `[x0, x1) × [y0, y1)`.
    Rect { x0: i64, y0: i64, x1: i64, y1: i64 },
    Polygon { vertices: Vec<(i64, i64)> },
}

fn scaled(table: &[(f64, f64)], cx: i64, cy: i64, size: u32) -> Vec<(i64, i64)> {
    let s = size as f64;
    table.iter().map(|&(ux, uy)| (cx + (ux * s).round() as i64, cy + (uy * s).round() as i64)).collect()
}

impl Footprint {
    pub fn of(obj: &ObjectSpec) -> Self {
        Self::new(obj.shape, obj.center, obj.size)
    }

    pub fn new(shape: Shape, center: (i32, i32), size: u32) -> Self {
        let (cx, cy) = (center.0 as i64, center.1 as i64);
        match shape {
            Shape::Circle => Footprint::Disk { cx, cy, r: size as i64 },
            Shape::Rectangle => {
                let hw = (RECT_HALF_W * size as f64).round() as i64;
                let hh = (RECT_HALF_H * size as f64).round() as i64;
                Footprint::Rect { x0: cx - hw, y0: cy - hh, x1: cx + hw, y1: cy + hh }
            }
            Shape::Triangle => Footprint::Polygon { vertices: scaled(&TRIANGLE, cx, cy, size) },
            Shape::Polygon => Footprint::Polygon { vertices: scaled(&HEXAGON, cx, cy, size) },
            Shape::Star => Footprint::Polygon { vertices: scaled(&STAR, cx, cy, size) },
        }
    }

    /// Point-in-shape test at an integer pixel coordinate.
    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        match self {
            Footprint::Disk { cx, cy, r } => {
                let (dx, dy) = (x - cx, y - cy);
                dx * dx + dy * dy <= r * r
            }
            Footprint::Rect { x0, y0, x1, y1 } => x >= *x0 && x < *x1 && y >= *y0 && y < *y1,
            Footprint::Polygon { vertices } => polygon_contains(vertices, x, y),
        }
    }

    /// Inclusive pixel bounds `(x_min, y_min, x_max, y_max)` that enclose every covered pixel.
    pub fn bounds(&self) -> (i32, i32, i32, i32) {
        let (a, b, c, d) = match self {
            Footprint::Disk { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
            Footprint::Rect { x0, y0, x1, y1 } => (*x0, *y0, x1 - 1, y1 - 1),
            Footprint::Polygon { vertices } => {
                let xs = vertices.iter().map(|v| v.0);
                let ys = vertices.iter().map(|v| v.1);
                (xs.clone().min().unwrap(), ys.clone().min().unwrap(), xs.max().unwrap(), ys.max().unwrap())
            }
        };
        (a as i32, b as i32, c as i32, d as i32)
    }

    /// Tight bounding box of the pixels actually covered, or `None` when empty.
    pub fn pixel_bbox(&self) -> Option<[i32; 4]> {
        let (x0, y0, x1, y1) = self.bounds();
        let mut bb: Option<[i32; 4]> = None;
        for y in y0..=y1 {
            for x in x0..=x1 {
                if self.contains(x as i64, y as i64) {
                    bb = Some(match bb {
                        None => [x, y, x, y],
                        Some([a, b, c, d]) => [a.min(x), b.min(y), c.max(x), d.max(y)],
                    });
                }
            }
        }
        bb
    }

    /// Exact pixel-level overlap test.
    pub fn overlaps(&self, other: &Footprint) -> bool {
        let (ax0, ay0, ax1, ay1) = self.bounds();
        let (bx0, by0, bx1, by1) = other.bounds();
        let (x0, y0, x1, y1) = (ax0.max(bx0), ay0.max(by0), ax1.min(bx1), ay1.min(by1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                if self.contains(x as i64, y as i64) && other.contains(x as i64, y as i64) {
                    return true;
                }
            }
        }
        false
    }
}

/// Even-odd crossing test evaluated exactly in integers.
fn polygon_contains(vertices: &[(i64, i64)], px: i64, py: i64) -> bool {
    let mut inside = false;
    let n = vertices.len();
    for i in 0..n {
        let (xi, yi) = vertices[i];
        let (xj, yj) = vertices[(i + 1) % n];
        if (yi > py) != (yj > py) {
            // px < xi + (py - yi) * (xj - xi) / (yj - yi)
            let dy = yj - yi;
            let lhs = (px - xi) * dy;
            let rhs = (py - yi) * (xj - xi);
            let left_of_edge = if dy > 0 { lhs < rhs } else { lhs > rhs };
            if left_of_edge {
                inside = !inside;
            }
        }
    }
    inside
}
