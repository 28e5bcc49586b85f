#![allow(dead_code)]

use crowd_forecast::forecast::ForecastRequest;
use crowd_forecast::geometry::Point2;
use crowd_forecast::ingestion::{AgentTrack, Frame, Sample, Scene};
use crowd_forecast::statistics::WeibullTable;
use crowd_forecast::world::{Calibration, Grid, WorldModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn open_world(cols: usize, rows: usize, cell: f64) -> WorldModel {
    WorldModel::new(
        Grid::new(cols, rows, cell).unwrap(),
        Calibration::from_pixel_size(45.0).unwrap(),
    )
    .unwrap()
}

pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2> {
    vec![
        Point2::new(x0, y0),
        Point2::new(x1, y0),
        Point2::new(x1, y1),
        Point2::new(x0, y1),
    ]
}

/// Track sampled every frame in `0..=t`, passing through `at_cut` at `t`.
pub fn walker(id: u64, at_cut: Point2, motion: Point2, t: Frame) -> AgentTrack {
    let samples = (0..=t)
        .map(|f| Sample {
            frame: f,
            position: at_cut + motion * (f - t) as f64,
        })
        .collect();
    AgentTrack::new(id, samples).unwrap()
}

/// Random walkers over an 80x40 grid of 10cm cells.
pub fn random_request(seed: u64, n: usize) -> ForecastRequest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = open_world(80, 40, 10.0);
    let t = rng.gen_range(10..80);
    let t_e = t + rng.gen_range(1..90);
    let tracks = (0..n)
        .map(|i| {
            let p = Point2::new(rng.gen_range(0.0..800.0), rng.gen_range(0.0..400.0));
            let m = Point2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            walker(i as u64 + 1, p, m, t)
        })
        .collect();
    let scene = Scene::new(tracks, t, world).unwrap();
    let mut req = ForecastRequest::new(scene, t_e, seed);
    req.table = WeibullTable::default()
        .with_reduction_cap(rng.gen_range(0.0..1.0))
        .unwrap();
    req
}
