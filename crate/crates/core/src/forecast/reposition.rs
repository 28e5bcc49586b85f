//! Final clean-up pass: separates overlapping agents and moves agents out
//! of obstacle cells.

use super::ForecastError;
use crate::geometry::Point2;
use crate::ingestion::AgentId;
use crate::world::WorldModel;

pub const DEFAULT_MAX_ITERATIONS: usize = 50;

/// Relative slack on the separation check after convergence.
pub const SEPARATION_TOLERANCE: f64 = 1e-6;

// Pairs closer than min_sep * (1 - OVERLAP_SLACK) are pushed apart.
const OVERLAP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RepositionOutcome {
    pub positions: Vec<Point2>,
    /// Agents still overlapping a neighbour or sitting in an obstacle cell.
    pub unresolved: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
}

/// Gauss–Seidel resolution in ascending agent-id order. Each sweep pushes
/// every overlapping pair apart symmetrically along the line between them
/// (`+x` for coincident agents), then snaps agents in blocked or
/// out-of-bounds cells to the nearest free cell center.
pub fn reposition_points(
    ids: &[AgentId],
    positions: &[Point2],
    world: &WorldModel,
    min_separation_cm: f64,
    max_iterations: usize,
) -> Result<RepositionOutcome, ForecastError> {
    assert_eq!(ids.len(), positions.len());
    if !(min_separation_cm.is_finite() && min_separation_cm > 0.0) {
        return Err(ForecastError::InvalidRequest(format!(
            "minimum separation must be positive, got {min_separation_cm}"
        )));
    }
    if world.free_cell_count() == 0 {
        return Err(ForecastError::EnvironmentSaturated);
    }

    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by_key(|&i| ids[i]);
    let mut pos = positions.to_vec();
    let threshold = min_separation_cm * (1.0 - OVERLAP_SLACK);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        let mut changed = false;

        for (a, &i) in order.iter().enumerate() {
            for &j in &order[a + 1..] {
                let d = pos[i].distance(pos[j]);
                if d < threshold {
                    let axis = if d > 0.0 {
                        (pos[j] - pos[i]) * (1.0 / d)
                    } else {
                        Point2::new(1.0, 0.0)
                    };
                    let push = axis * (0.5 * (min_separation_cm - d));
                    pos[i] = pos[i] - push;
                    pos[j] += push;
                    changed = true;
                }
            }
        }

        for &i in &order {
            if !world.is_free(pos[i]) {
                // free_cell_count > 0 was checked above
                let (_, center) = world.nearest_free_cell(pos[i]).expect("free cell exists");
                pos[i] = center;
                changed = true;
            }
        }

        if !changed {
            converged = true;
            break;
        }
    }

    let unresolved = unresolved_flags(&pos, world, min_separation_cm);
    Ok(RepositionOutcome {
        positions: pos,
        unresolved,
        iterations,
        converged,
    })
}

fn unresolved_flags(pos: &[Point2], world: &WorldModel, min_separation_cm: f64) -> Vec<bool> {
    let limit = min_separation_cm * (1.0 - SEPARATION_TOLERANCE);
    let mut flags: Vec<bool> = pos.iter().map(|&p| !world.is_free(p)).collect();
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            if pos[i].distance(pos[j]) < limit {
                flags[i] = true;
                flags[j] = true;
            }
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Calibration, Grid};

    fn open_world() -> WorldModel {
        WorldModel::new(
            Grid::new(50, 50, 10.0).unwrap(),
            Calibration::from_pixel_size(45.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn coincident_agents_split_along_x() {
        let p = Point2::new(200.0, 200.0);
        let out = reposition_points(&[1, 2], &[p, p], &open_world(), 45.0, 50).unwrap();
        let d = out.positions[0].distance(out.positions[1]);
        assert!(d >= 45.0 * (1.0 - SEPARATION_TOLERANCE));
        assert!(out.positions[1].x > out.positions[0].x);
        assert_eq!(out.positions[0].y, out.positions[1].y);
        assert!(out.unresolved.iter().all(|u| !u));
    }

    #[test]
    fn agent_in_obstacle_moves_to_adjacent_free_center() {
        let blocked = vec![
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(10.0, 10.0),
            Point2::new(0.0, 10.0),
        ];
        let world = WorldModel::new(
            Grid::new(2, 1, 10.0).unwrap(),
            Calibration::from_pixel_size(45.0).unwrap(),
        )
        .unwrap()
        .add_obstacle(&blocked)
        .unwrap();
        let out = reposition_points(&[1], &[Point2::new(5.0, 5.0)], &world, 45.0, 50).unwrap();
        assert_eq!(out.positions[0], Point2::new(15.0, 5.0));
        assert!(!out.unresolved[0]);
    }

    #[test]
    fn line_of_three_spreads_out() {
        let pts = [
            Point2::new(200.0, 200.0),
            Point2::new(230.0, 200.0),
            Point2::new(260.0, 200.0),
        ];
        let out = reposition_points(&[1, 2, 3], &pts, &open_world(), 45.0, 50).unwrap();
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(out.positions[i].distance(out.positions[j]) >= 45.0 * (1.0 - 1e-6));
            }
        }
        assert!(out.converged);
    }

    #[test]
    fn saturated_world_errors() {
        let full = WorldModel::new(
            Grid::with_mask(2, 2, 10.0, vec![true; 4]).unwrap(),
            Calibration::from_pixel_size(45.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            reposition_points(&[1], &[Point2::ZERO], &full, 45.0, 50),
            Err(ForecastError::EnvironmentSaturated)
        ));
    }

    #[test]
    fn crowding_beyond_capacity_is_flagged() {
        // a 1x1 free area cannot hold two agents 45cm apart
        let world = WorldModel::new(
            Grid::new(1, 1, 10.0).unwrap(),
            Calibration::from_pixel_size(45.0).unwrap(),
        )
        .unwrap();
        let p = Point2::new(5.0, 5.0);
        let out = reposition_points(&[1, 2], &[p, p], &world, 45.0, 50).unwrap();
        assert!(!out.converged);
        assert!(out.unresolved.iter().all(|&u| u));
    }
}
