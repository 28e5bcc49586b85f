//! Static scene: grid discretization, obstacle cells, calibration and the
//! environment-complexity scalar.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{clip_to_rect, contains_even_odd, dedup_vertices, signed_area, Point2};

/// Total filmed area, in percent.
pub const TOTAL_PERCENT: f64 = 100.0;

pub const DEFAULT_PERSON_SIZE_CM: f64 = 45.0;
pub const DEFAULT_FRAME_RATE: f64 = 30.0;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate polygon")]
    DegeneratePolygon,
    #[error("failed to read world config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse world config {path}: {message}")]
    Parse { path: String, message: String },
}

/// Coordinate unit of an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Cm,
    Px,
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cm" => Ok(Unit::Cm),
            "px" => Ok(Unit::Px),
            other => Err(format!("unknown unit '{other}' (expected px or cm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub avg_person_size_px: f64,
    #[serde(default = "default_person_size_cm")]
    pub avg_person_size_cm: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
}

fn default_person_size_cm() -> f64 {
    DEFAULT_PERSON_SIZE_CM
}

fn default_frame_rate() -> f64 {
    DEFAULT_FRAME_RATE
}

impl Calibration {
    pub fn new(
        avg_person_size_px: f64,
        avg_person_size_cm: f64,
        frame_rate: f64,
    ) -> Result<Self, WorldError> {
        let c = Self {
            avg_person_size_px,
            avg_person_size_cm,
            frame_rate,
        };
        c.validate()?;
        Ok(c)
    }

    /// Calibration with the default person size and frame rate.
    pub fn from_pixel_size(avg_person_size_px: f64) -> Result<Self, WorldError> {
        Self::new(
            avg_person_size_px,
            DEFAULT_PERSON_SIZE_CM,
            DEFAULT_FRAME_RATE,
        )
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        for (name, v) in [
            ("avg_person_size_px", self.avg_person_size_px),
            ("avg_person_size_cm", self.avg_person_size_cm),
            ("frame_rate", self.frame_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(WorldError::InvalidCalibration(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        let k = self.cm_per_px();
        if !(k.is_finite() && k > 0.0) {
            return Err(WorldError::InvalidCalibration(format!(
                "cm_per_px must be finite and positive, got {k}"
            )));
        }
        Ok(())
    }

    pub fn cm_per_px(&self) -> f64 {
        self.avg_person_size_cm / self.avg_person_size_px
    }

    /// Factor that converts a length in `unit` to centimeters.
    pub fn to_cm_factor(&self, unit: Unit) -> f64 {
        match unit {
            Unit::Cm => 1.0,
            Unit::Px => self.cm_per_px(),
        }
    }
}

/// Row-major cell grid anchored at the origin. Cell `(col, row)` has index
/// `row * cols + col` and covers `[col*s, (col+1)*s) x [row*s, (row+1)*s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    cols: usize,
    rows: usize,
    cell_size_cm: f64,
    obstacle_mask: Vec<bool>,
}

impl Grid {
    pub fn new(cols: usize, rows: usize, cell_size_cm: f64) -> Result<Self, WorldError> {
        if cols == 0 || rows == 0 {
            return Err(WorldError::InvalidGrid(format!(
                "grid dimensions must be positive, got {cols}x{rows}"
            )));
        }
        if !(cell_size_cm.is_finite() && cell_size_cm > 0.0) {
            return Err(WorldError::InvalidGrid(format!(
                "cell size must be finite and positive, got {cell_size_cm}"
            )));
        }
        Ok(Self {
            cols,
            rows,
            cell_size_cm,
            obstacle_mask: vec![false; cols * rows],
        })
    }

    pub fn with_mask(
        cols: usize,
        rows: usize,
        cell_size_cm: f64,
        obstacle_mask: Vec<bool>,
    ) -> Result<Self, WorldError> {
        let mut grid = Self::new(cols, rows, cell_size_cm)?;
        if obstacle_mask.len() != cols * rows {
            return Err(WorldError::InvalidGrid(format!(
                "mask length {} does not match {cols}x{rows}",
                obstacle_mask.len()
            )));
        }
        grid.obstacle_mask = obstacle_mask;
        Ok(grid)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cell_size_cm(&self) -> f64 {
        self.cell_size_cm
    }

    pub fn len(&self) -> usize {
        self.obstacle_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacle_mask.is_empty()
    }

    pub fn width_cm(&self) -> f64 {
        self.cols as f64 * self.cell_size_cm
    }

    pub fn height_cm(&self) -> f64 {
        self.rows as f64 * self.cell_size_cm
    }

    pub fn obstacle_mask(&self) -> &[bool] {
        &self.obstacle_mask
    }

    pub fn is_obstacle(&self, index: usize) -> bool {
        self.obstacle_mask[index]
    }

    pub fn cell_center(&self, index: usize) -> Point2 {
        let (col, row) = (index % self.cols, index / self.cols);
        Point2::new(
            (col as f64 + 0.5) * self.cell_size_cm,
            (row as f64 + 0.5) * self.cell_size_cm,
        )
    }

    /// Index of the cell containing `p`, or `None` when out of bounds.
    pub fn cell_index(&self, p: Point2) -> Option<usize> {
        if !p.is_finite() || p.x < 0.0 || p.y < 0.0 {
            return None;
        }
        let col = (p.x / self.cell_size_cm).floor() as usize;
        let row = (p.y / self.cell_size_cm).floor() as usize;
        (col < self.cols && row < self.rows).then_some(row * self.cols + col)
    }

    pub fn obstacle_count(&self) -> usize {
        self.obstacle_mask.iter().filter(|&&o| o).count()
    }
}

/// Immutable scene description. Mutating operations return a new value.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    grid: Grid,
    calibration: Calibration,
    obstacle_cells: usize,
}

impl WorldModel {
    pub fn new(grid: Grid, calibration: Calibration) -> Result<Self, WorldError> {
        calibration.validate()?;
        let obstacle_cells = grid.obstacle_count();
        Ok(Self {
            grid,
            calibration,
            obstacle_cells,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }

    /// O_v: percent of the filmed area covered by obstacle cells.
    pub fn occupancy_percent(&self) -> f64 {
        self.obstacle_cells as f64 / self.grid.len() as f64 * TOTAL_PERCENT
    }

    /// O_v recomputed from the mask rather than the running count.
    pub fn occupancy_percent_from_mask(&self) -> f64 {
        self.grid.obstacle_count() as f64 / self.grid.len() as f64 * TOTAL_PERCENT
    }

    pub fn free_cell_count(&self) -> usize {
        self.grid.len() - self.obstacle_cells
    }

    /// Marks every cell whose center lies inside `polygon` (even-odd rule).
    /// The polygon is clipped to the grid bounds first.
    pub fn add_obstacle(&self, polygon: &[Point2]) -> Result<WorldModel, WorldError> {
        if polygon.iter().any(|p| !p.is_finite()) {
            return Err(WorldError::DegeneratePolygon);
        }
        let clipped = dedup_vertices(&clip_to_rect(
            polygon,
            self.grid.width_cm(),
            self.grid.height_cm(),
        ));
        if clipped.len() < 3 || signed_area(&clipped).abs() <= f64::EPSILON {
            return Err(WorldError::DegeneratePolygon);
        }

        let s = self.grid.cell_size_cm;
        let (mut min, mut max) = (clipped[0], clipped[0]);
        for p in &clipped {
            min = Point2::new(min.x.min(p.x), min.y.min(p.y));
            max = Point2::new(max.x.max(p.x), max.y.max(p.y));
        }
        let col_range = cell_span(min.x, max.x, s, self.grid.cols);
        let row_range = cell_span(min.y, max.y, s, self.grid.rows);

        let mut next = self.clone();
        for row in row_range {
            for col in col_range.clone() {
                let idx = row * self.grid.cols + col;
                if !next.grid.obstacle_mask[idx]
                    && contains_even_odd(&clipped, next.grid.cell_center(idx))
                {
                    next.grid.obstacle_mask[idx] = true;
                    next.obstacle_cells += 1;
                }
            }
        }
        Ok(next)
    }

    /// True iff `position` lies in an in-bounds, non-obstacle cell.
    pub fn is_free(&self, position: Point2) -> bool {
        self.grid
            .cell_index(position)
            .is_some_and(|idx| !self.grid.obstacle_mask[idx])
    }

    /// Nearest free cell center to `p`; ties go to the lower cell index.
    pub fn nearest_free_cell(&self, p: Point2) -> Option<(usize, Point2)> {
        let mut best: Option<(usize, Point2, f64)> = None;
        for idx in 0..self.grid.len() {
            if self.grid.obstacle_mask[idx] {
                continue;
            }
            let c = self.grid.cell_center(idx);
            let d = c.distance_squared(p);
            if best.is_none_or(|(_, _, bd)| d < bd) {
                best = Some((idx, c, d));
            }
        }
        best.map(|(i, c, _)| (i, c))
    }
}

/// Cell indices whose centers may fall within `[lo, hi]`.
fn cell_span(lo: f64, hi: f64, cell: f64, n: usize) -> std::ops::Range<usize> {
    let first = ((lo / cell) - 0.5).floor().max(0.0) as usize;
    let last = (((hi / cell) - 0.5).ceil().max(0.0) as usize + 1).min(n);
    first.min(n)..last
}

/// EC_v = min(1, O_v / T_v).
pub fn environment_complexity(world: &WorldModel) -> f64 {
    complexity_from_occupancy(world.occupancy_percent())
}

/// EC for a manually informed occupancy percentage.
pub fn complexity_from_occupancy(occupancy_percent: f64) -> f64 {
    (occupancy_percent.max(0.0) / TOTAL_PERCENT).min(1.0)
}

/// On-disk world description (JSON or TOML, chosen by extension).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Unit of `cell_size` and obstacle vertices.
    pub unit: Unit,
    pub grid: GridConfig,
    pub calibration: Calibration,
    #[serde(default)]
    pub obstacles: Vec<Vec<Point2>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub cols: usize,
    pub rows: usize,
    pub cell_size: f64,
}

impl WorldConfig {
    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
            path: display.clone(),
            source,
        })?;
        let parsed = if has_extension(path, "toml") {
            toml::from_str(&text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| WorldError::Parse {
            path: display,
            message,
        })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = if has_extension(path, "toml") {
            toml::to_string_pretty(self).map_err(std::io::Error::other)?
        } else {
            serde_json::to_string_pretty(self).map_err(std::io::Error::other)?
        };
        std::fs::write(path, text)
    }

    /// Builds the world, converting pixel inputs to centimeters.
    pub fn build(&self) -> Result<WorldModel, WorldError> {
        self.calibration.validate()?;
        let k = self.calibration.to_cm_factor(self.unit);
        let grid = Grid::new(self.grid.cols, self.grid.rows, self.grid.cell_size * k)?;
        let mut world = WorldModel::new(grid, self.calibration)?;
        for polygon in &self.obstacles {
            let cm: Vec<Point2> = polygon.iter().map(|&p| p * k).collect();
            world = world.add_obstacle(&cm)?;
        }
        Ok(world)
    }
}

pub(crate) fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(cols: usize, rows: usize) -> WorldModel {
        WorldModel::new(
            Grid::new(cols, rows, 10.0).unwrap(),
            Calibration::from_pixel_size(30.0).unwrap(),
        )
        .unwrap()
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2> {
        vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ]
    }

    fn with_occupancy(percent: f64) -> WorldModel {
        // 10x10 grid, mark `percent` cells directly
        let n = percent as usize;
        let mask: Vec<bool> = (0..100).map(|i| i < n.min(100)).collect();
        WorldModel::new(
            Grid::with_mask(10, 10, 10.0, mask).unwrap(),
            Calibration::from_pixel_size(30.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn ec_examples() {
        assert_eq!(environment_complexity(&with_occupancy(25.0)), 0.25);
        assert_eq!(environment_complexity(&with_occupancy(0.0)), 0.0);
        assert_eq!(environment_complexity(&with_occupancy(100.0)), 1.0);
    }

    #[test]
    fn ec_clamps_above_total() {
        assert_eq!(complexity_from_occupancy(120.0), 1.0);
        assert_eq!(complexity_from_occupancy(25.0), 0.25);
    }

    #[test]
    fn quarter_polygon_gives_25_percent() {
        let w = world(10, 10)
            .add_obstacle(&rect(0.0, 0.0, 50.0, 50.0))
            .unwrap();
        // brute-force oracle over all cell centers
        let poly = rect(0.0, 0.0, 50.0, 50.0);
        let expected = (0..100)
            .filter(|&i| {
                let c = w.grid().cell_center(i);
                c.x > poly[0].x && c.x < poly[2].x && c.y > poly[0].y && c.y < poly[2].y
            })
            .count();
        assert_eq!(expected, 25);
        assert_eq!(w.occupancy_percent(), 25.0);
        assert_eq!(environment_complexity(&w), 0.25);
    }

    #[test]
    fn polygon_outside_grid_is_degenerate() {
        let w = world(10, 10);
        let err = w
            .add_obstacle(&rect(200.0, 200.0, 300.0, 300.0))
            .unwrap_err();
        assert!(matches!(err, WorldError::DegeneratePolygon));
        assert_eq!(w.occupancy_percent(), 0.0);
    }

    #[test]
    fn too_few_vertices_rejected() {
        let w = world(10, 10);
        let err = w
            .add_obstacle(&[Point2::new(1.0, 1.0), Point2::new(5.0, 5.0)])
            .unwrap_err();
        assert!(matches!(err, WorldError::DegeneratePolygon));
        let collinear = [
            Point2::new(1.0, 1.0),
            Point2::new(5.0, 5.0),
            Point2::new(9.0, 9.0),
        ];
        assert!(matches!(
            w.add_obstacle(&collinear),
            Err(WorldError::DegeneratePolygon)
        ));
    }

    #[test]
    fn add_twice_is_idempotent() {
        let poly = rect(12.0, 7.0, 61.0, 44.0);
        let once = world(10, 10).add_obstacle(&poly).unwrap();
        let twice = once.add_obstacle(&poly).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.occupancy_percent(), twice.occupancy_percent());
    }

    #[test]
    fn add_does_not_modify_original() {
        let w = world(10, 10);
        let _ = w.add_obstacle(&rect(0.0, 0.0, 50.0, 50.0)).unwrap();
        assert_eq!(w.occupancy_percent(), 0.0);
    }

    #[test]
    fn partially_outside_polygon_is_clipped() {
        let w = world(10, 10)
            .add_obstacle(&rect(-50.0, -50.0, 20.0, 20.0))
            .unwrap();
        assert_eq!(w.grid().obstacle_count(), 4);
    }

    #[test]
    fn is_free_examples() {
        let w = world(10, 10)
            .add_obstacle(&rect(0.0, 0.0, 10.0, 10.0))
            .unwrap();
        assert!(!w.is_free(w.grid().cell_center(0)));
        assert!(w.is_free(w.grid().cell_center(1)));
        assert!(!w.is_free(Point2::new(-1.0, -1.0)));
        assert!(!w.is_free(Point2::new(100.0, 5.0)));
    }

    #[test]
    fn nearest_free_cell_tie_breaks_on_index() {
        let w = world(3, 3)
            .add_obstacle(&rect(10.0, 10.0, 20.0, 20.0))
            .unwrap();
        // center cell is blocked; four neighbours tie, lowest index is 1
        let (idx, c) = w.nearest_free_cell(Point2::new(15.0, 15.0)).unwrap();
        assert_eq!(idx, 1);
        assert_eq!(c, Point2::new(15.0, 5.0));
    }

    #[test]
    fn calibration_rejects_non_positive() {
        assert!(Calibration::new(0.0, 45.0, 30.0).is_err());
        assert!(Calibration::new(30.0, -1.0, 30.0).is_err());
        assert!(Calibration::new(30.0, 45.0, f64::NAN).is_err());
        assert_eq!(Calibration::from_pixel_size(90.0).unwrap().cm_per_px(), 0.5);
    }

    #[test]
    fn config_converts_pixels() {
        let cfg = WorldConfig {
            unit: Unit::Px,
            grid: GridConfig {
                cols: 4,
                rows: 4,
                cell_size: 20.0,
            },
            calibration: Calibration::from_pixel_size(90.0).unwrap(),
            obstacles: vec![rect(0.0, 0.0, 40.0, 40.0)],
        };
        let w = cfg.build().unwrap();
        assert_eq!(w.grid().cell_size_cm(), 10.0);
        assert_eq!(w.grid().obstacle_count(), 4);
    }

    #[test]
    fn config_parses_toml_and_json() {
        let toml_text = r#"
unit = "cm"
obstacles = [[[0.0, 0.0], [20.0, 0.0], [20.0, 20.0]]]
[grid]
cols = 5
rows = 5
cell_size = 10.0
[calibration]
avg_person_size_px = 30.0
"#;
        let cfg: WorldConfig = toml::from_str(toml_text).unwrap();
        assert_eq!(cfg.calibration.avg_person_size_cm, 45.0);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: WorldConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unit_field_is_mandatory() {
        let text = r#"{"grid":{"cols":2,"rows":2,"cell_size":1.0},"calibration":{"avg_person_size_px":3.0}}"#;
        assert!(serde_json::from_str::<WorldConfig>(text).is_err());
    }
}
