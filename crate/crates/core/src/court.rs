//! Court constants, coordinate standardization and the evaluation grid.
//!
//! Coordinates are meters with the origin at a baseline corner of the full
//! court. After standardization every attack runs towards the goal on the
//! left half, so `x` grows away from the attacked baseline.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full-court length. The nominal half length is rounded, so this is not exactly twice it.
pub const FULL_LENGTH: f64 = 28.65;
/// Positions further than this outside the court are rejected rather than clamped.
pub const OUT_OF_BOUNDS_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

/// Displacements and velocities share the point representation.
pub type Vec2 = Point;

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, rhs: Point) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackDirection {
    Left,
    Right,
}

/// Half-court geometry. Defaults are NBA dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CourtSpec {
    pub half_length: f64,
    /// Length used by the 180° standardization rotation.
    pub full_length: f64,
    pub width: f64,
    pub goal_position: Point,
    pub three_point_radius: f64,
    pub corner_three_distance: f64,
    pub corner_zone_y_extent: f64,
}

impl Default for CourtSpec {
    fn default() -> Self {
        CourtSpec {
            half_length: 14.33,
            full_length: FULL_LENGTH,
            width: 15.24,
            goal_position: Point::new(1.60, 7.62),
            three_point_radius: 7.24,
            corner_three_distance: 6.71,
            corner_zone_y_extent: 0.91,
        }
    }
}

impl CourtSpec {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("half_length", self.half_length),
            ("full_length", self.full_length),
            ("width", self.width),
            ("three_point_radius", self.three_point_radius),
            ("corner_three_distance", self.corner_three_distance),
            ("corner_zone_y_extent", self.corner_zone_y_extent),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("court {name} must be positive, got {v}")));
            }
        }
        if (self.full_length - 2.0 * self.half_length).abs() > 0.05 {
            return Err(Error::config("full_length must be about twice half_length"));
        }
        if !self.contains(self.goal_position) {
            return Err(Error::config("goal position lies outside the half court"));
        }
        Ok(())
    }


    /// Whether `p` lies in the closed half-court rectangle.
    pub fn contains(&self, p: Point) -> bool {
        p.is_finite() && (0.0..=self.half_length).contains(&p.x) && (0.0..=self.width).contains(&p.y)
    }

    pub fn distance_to_goal(&self, p: Point) -> f64 {
        p.distance(self.goal_position)
    }

    /// Shot value from `p`: 3 beyond the arc or in a corner zone past the
    /// corner distance, otherwise 2.
    pub fn point_value(&self, p: Point) -> u8 {
        let d = self.distance_to_goal(p);
        let in_corner = p.y <= self.corner_zone_y_extent || p.y >= self.width - self.corner_zone_y_extent;
        if d >= self.three_point_radius || (in_corner && d >= self.corner_three_distance) {
            3
        } else {
            2
        }
    }

    /// Clamps a full-court position lying at most [`OUT_OF_BOUNDS_TOLERANCE`]
    /// outside the court; anything further is a malformed frame.
    pub fn clamp_full_court(&self, p: Point) -> Result<Point> {
        let (lx, ly) = (self.full_length, self.width);
        if !p.is_finite() {
            return Err(Error::MalformedFrame(format!("non-finite position {p:?}")));
        }
        let tol = OUT_OF_BOUNDS_TOLERANCE;
        if p.x < -tol || p.x > lx + tol || p.y < -tol || p.y > ly + tol {
            return Err(Error::MalformedFrame(format!(
                "position ({:.2}, {:.2}) is more than {tol} m outside the court",
                p.x, p.y
            )));
        }
        Ok(Point::new(p.x.clamp(0.0, lx), p.y.clamp(0.0, ly)))
    }

    /// 180° rotation about the court center for attacks towards the right
    /// basket, identity otherwise.
    pub fn standardize_point(&self, p: Point, direction: AttackDirection) -> Point {
        match direction {
            AttackDirection::Left => p,
            AttackDirection::Right => Point::new(self.full_length - p.x, self.width - p.y),
        }
    }

    pub fn standardize_velocity(&self, v: Vec2, direction: AttackDirection) -> Vec2 {
        match direction {
            AttackDirection::Left => v,
            AttackDirection::Right => -v,
        }
    }
}

/// One cell of the evaluation grid. Cells on the far edges are clipped to
/// the court, so their center and area refer to the clipped rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub center: Point,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourtGrid {
    pub court: CourtSpec,
    pub cell_size: f64,
    pub n_x: usize,
    pub n_y: usize,
    /// Row-major with `x` varying fastest.
    pub cells: Vec<Cell>,
}

pub const MIN_CELL_SIZE: f64 = 0.1;
pub const MAX_CELL_SIZE: f64 = 2.0;

impl CourtGrid {
    pub fn new(court: CourtSpec, cell_size: f64) -> Result<Self> {
        court.validate()?;
        // Allow a single-column grid as long as the cell covers the half length.
        let max = MAX_CELL_SIZE.max(court.half_length);
        if !(cell_size.is_finite() && (MIN_CELL_SIZE..=max).contains(&cell_size)) {
            return Err(Error::config(format!(
                "cell size {cell_size} outside [{MIN_CELL_SIZE}, {MAX_CELL_SIZE}]"
            )));
        }
        let n_x = (court.half_length / cell_size - 1e-9).ceil().max(1.0) as usize;
        let n_y = (court.width / cell_size - 1e-9).ceil().max(1.0) as usize;
        let span = |i: usize, limit: f64| {
            let lo = i as f64 * cell_size;
            let hi = ((i + 1) as f64 * cell_size).min(limit);
            (0.5 * (lo + hi), hi - lo)
        };
        let mut cells = Vec::with_capacity(n_x * n_y);
        for j in 0..n_y {
            let (cy, hy) = span(j, court.width);
            for i in 0..n_x {
                let (cx, hx) = span(i, court.half_length);
                cells.push(Cell {
                    center: Point::new(cx, cy),
                    area: hx * hy,
                });
            }
        }
        Ok(CourtGrid {
            court,
            cell_size,
            n_x,
            n_y,
            cells,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        self.cells.iter().map(|c| c.center)
    }

    /// Index of the cell containing `p`, if `p` is on the half court.
    pub fn cell_index(&self, p: Point) -> Option<usize> {
        if !self.court.contains(p) {
            return None;
        }
        let i = ((p.x / self.cell_size) as usize).min(self.n_x - 1);
        let j = ((p.y / self.cell_size) as usize).min(self.n_y - 1);
        Some(j * self.n_x + i)
    }
}

/// Scalar surface over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: CourtGrid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: CourtGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Numerical(format!(
                "field has {} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite field value at cell {bad}")));
        }
        Ok(Field { grid, values })
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Cell index and value of the maximum; ties resolve to the first cell.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((i, v)),
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,value\n");
        for (cell, v) in self.grid.cells.iter().zip(&self.values) {
            out.push_str(&format!("{},{},{}\n", cell.center.x, cell.center.y, v));
        }
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            cell_size: f64,
            n_x: usize,
            n_y: usize,
            half_length: f64,
            width: f64,
            order: &'static str,
            values: &'a [f64],
        }
        let doc = Doc {
            cell_size: self.grid.cell_size,
            n_x: self.grid.n_x,
            n_y: self.grid.n_y,
            half_length: self.grid.court.half_length,
            width: self.grid.court.width,
            order: "row-major, x fastest",
            values: &self.values,
        };
        serde_json::to_string_pretty(&doc).expect("field document serializes")
    }
}
