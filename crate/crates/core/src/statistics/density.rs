//! Local crowd density around each agent, in persons per square meter.

use std::collections::HashMap;

use super::StatsError;
use crate::geometry::Point2;

pub const DEFAULT_DENSITY_RADIUS_CM: f64 = 100.0;

const CM2_PER_M2: f64 = 1e4;

fn disc_area_m2(radius_cm: f64) -> f64 {
    std::f64::consts::PI * radius_cm * radius_cm / CM2_PER_M2
}

fn check_radius(radius_cm: f64) -> Result<(), StatsError> {
    if !(radius_cm.is_finite() && radius_cm > 0.0) {
        return Err(StatsError::Domain(format!(
            "density radius must be positive, got {radius_cm}"
        )));
    }
    Ok(())
}

/// Agents (subject included) within the closed disc of `radius_cm` around
/// `positions[subject]`, divided by the disc area in m².
pub fn local_density(
    positions: &[Point2],
    subject: usize,
    radius_cm: f64,
) -> Result<f64, StatsError> {
    check_radius(radius_cm)?;
    let center = *positions
        .get(subject)
        .ok_or_else(|| StatsError::Domain(format!("subject index {subject} out of range")))?;
    let r2 = radius_cm * radius_cm;
    let count = positions
        .iter()
        .filter(|p| p.distance_squared(center) <= r2)
        .count();
    Ok(count as f64 / disc_area_m2(radius_cm))
}

/// Densities for every agent, bucketing positions into radius-sized cells.
pub fn local_densities(positions: &[Point2], radius_cm: f64) -> Result<Vec<f64>, StatsError> {
    check_radius(radius_cm)?;
    let key = |p: Point2| {
        (
            (p.x / radius_cm).floor() as i64,
            (p.y / radius_cm).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in positions.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let r2 = radius_cm * radius_cm;
    let area = disc_area_m2(radius_cm);
    Ok(positions
        .iter()
        .map(|&p| {
            let (cx, cy) = key(p);
            let mut count = 0usize;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(members) = buckets.get(&(cx + dx, cy + dy)) {
                        count += members
                            .iter()
                            .filter(|&&j| positions[j].distance_squared(p) <= r2)
                            .count();
                    }
                }
            }
            count as f64 / area
        })
        .collect())
}

/// Maps a density to one of the ten table levels: round half up, then
/// clamp to `1..=10`.
pub fn density_level(rho: f64) -> u8 {
    if rho.is_nan() {
        return 1;
    }
    (rho + 0.5).floor().clamp(1.0, 10.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn lone_agent() {
        let d = local_density(&[Point2::new(5.0, 5.0)], 0, 100.0).unwrap();
        assert!((d - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn four_agents_in_radius() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(50.0, 0.0),
            Point2::new(0.0, -70.0),
            Point2::new(30.0, 30.0),
            Point2::new(300.0, 0.0),
        ];
        let d = local_density(&pts, 0, 100.0).unwrap();
        assert!((d - 4.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn boundary_is_closed() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(100.0, 0.0)];
        assert!((local_density(&pts, 0, 100.0).unwrap() - 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn levels() {
        assert_eq!(density_level(0.3), 1);
        assert_eq!(density_level(14.2), 10);
        assert_eq!(density_level(3.5), 4);
        assert_eq!(density_level(3.49), 3);
        assert_eq!(density_level(0.0), 1);
    }

    #[test]
    fn bucketed_matches_single() {
        let pts: Vec<Point2> = (0..40)
            .map(|i| Point2::new((i * 37 % 300) as f64, (i * 53 % 200) as f64 - 50.0))
            .collect();
        let all = local_densities(&pts, 80.0).unwrap();
        for (i, d) in all.iter().enumerate() {
            assert_eq!(*d, local_density(&pts, i, 80.0).unwrap());
        }
    }

    #[test]
    fn bad_radius_rejected() {
        assert!(local_density(&[Point2::ZERO], 0, 0.0).is_err());
        assert!(local_densities(&[Point2::ZERO], -1.0).is_err());
    }
}
