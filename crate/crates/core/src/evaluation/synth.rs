//! Synthetic constant-velocity walkers with scripted events.
//!
//! Walkers keep their velocity up to the cut frame. From the cut frame on
//! each frame's step is scaled by `1 - EC` of the world at that frame, the
//! same rule the forecaster applies, so an interaction-free forecast of a
//! generated scene is exact up to rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::forecast::{EventAgent, EventKind, EventSpec};
use crate::geometry::Point2;
use crate::ingestion::{AgentId, AgentTrack, Frame, Sample};
use crate::world::{environment_complexity, Unit, WorldConfig, WorldModel, DEFAULT_PERSON_SIZE_CM};

const MAX_SPAWN_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectSpec {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl RectSpec {
    pub fn polygon(&self) -> Vec<Point2> {
        vec![
            Point2::new(self.x0, self.y0),
            Point2::new(self.x1, self.y0),
            Point2::new(self.x1, self.y1),
            Point2::new(self.x0, self.y1),
        ]
    }

    fn valid(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1]
            .iter()
            .all(|v| v.is_finite())
            && self.x1 >= self.x0
            && self.y1 >= self.y0
    }
}

/// A group of walkers sharing a spawn region and nominal velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub count: usize,
    pub spawn: RectSpec,
    /// Nominal velocity, cm/frame.
    pub velocity: Point2,
    /// Per-agent speed multiplier drawn from `1 ± speed_jitter`.
    #[serde(default)]
    pub speed_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEvent {
    pub start: Frame,
    #[serde(default)]
    pub duration: Option<Frame>,
    #[serde(default)]
    pub obstacles: Vec<Vec<Point2>>,
    #[serde(default)]
    pub flows: Vec<FlowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    #[serde(default)]
    pub label: Option<String>,
    pub world: WorldConfig,
    pub cut_frame: Frame,
    pub target_frame: Frame,
    #[serde(default = "default_separation")]
    pub min_separation_cm: f64,
    pub flows: Vec<FlowSpec>,
    #[serde(default)]
    pub events: Vec<ScriptedEvent>,
}

fn default_separation() -> f64 {
    DEFAULT_PERSON_SIZE_CM
}

#[derive(Debug, Clone)]
pub struct SyntheticScenario {
    pub label: Option<String>,
    /// World description in centimeters.
    pub world_config: WorldConfig,
    pub world: WorldModel,
    pub cut_frame: Frame,
    pub target_frame: Frame,
    /// Original agents, frames `0..=cut_frame`.
    pub observed: Vec<AgentTrack>,
    /// Every agent up to the target frame.
    pub truth: Vec<AgentTrack>,
    pub events: Vec<EventSpec>,
}

struct Walker {
    id: AgentId,
    position: Point2,
    velocity: Point2,
    born: Frame,
    /// Frame the walker leaves with its event, if it does.
    leaves: Option<Frame>,
}

fn spawn_flow(
    rng: &mut ChaCha8Rng,
    flow: &FlowSpec,
    placed: &mut Vec<Point2>,
    min_separation_cm: f64,
) -> Result<Vec<(Point2, Point2)>, EvalError> {
    if !flow.spawn.valid() || !(0.0..1.0).contains(&flow.speed_jitter) || !flow.velocity.is_finite()
    {
        return Err(EvalError::InvalidParams(format!("bad flow {flow:?}")));
    }
    let r2 = min_separation_cm * min_separation_cm;
    let mut out = Vec::with_capacity(flow.count);
    for _ in 0..flow.count {
        let mut attempt = 0;
        let p = loop {
            if attempt == MAX_SPAWN_ATTEMPTS {
                return Err(EvalError::SpawnRegionTooSmall {
                    count: flow.count,
                    min_separation_cm,
                });
            }
            attempt += 1;
            let p = Point2::new(
                lerp(flow.spawn.x0, flow.spawn.x1, rng.gen()),
                lerp(flow.spawn.y0, flow.spawn.y1, rng.gen()),
            );
            if placed.iter().all(|q| q.distance_squared(p) >= r2) {
                break p;
            }
        };
        placed.push(p);
        let jitter = if flow.speed_jitter > 0.0 {
            1.0 + flow.speed_jitter * rng.gen_range(-1.0..1.0)
        } else {
            1.0
        };
        out.push((p, flow.velocity * jitter));
    }
    Ok(out)
}

fn lerp(a: f64, b: f64, u: f64) -> f64 {
    a + (b - a) * u
}

/// Generates a deterministic scenario for `seed`.
pub fn generate_synthetic(params: &SynthParams, seed: u64) -> Result<SyntheticScenario, EvalError> {
    let (t, t_e) = (params.cut_frame, params.target_frame);
    if t < 0 || t_e <= t {
        return Err(EvalError::InvalidParams(format!(
            "need 0 <= cut_frame < target_frame, got {t} and {t_e}"
        )));
    }
    if !(params.min_separation_cm.is_finite() && params.min_separation_cm > 0.0) {
        return Err(EvalError::InvalidParams(
            "min_separation_cm must be positive".into(),
        ));
    }

    // everything downstream works in centimeters
    let k = params.world.calibration.to_cm_factor(params.world.unit);
    let world_config = WorldConfig {
        unit: Unit::Cm,
        grid: crate::world::GridConfig {
            cell_size: params.world.grid.cell_size * k,
            ..params.world.grid
        },
        calibration: params.world.calibration,
        obstacles: params
            .world
            .obstacles
            .iter()
            .map(|poly| poly.iter().map(|&p| p * k).collect())
            .collect(),
    };
    let world = world_config.build()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walkers = Vec::new();
    let mut next_id: AgentId = 1;

    let mut placed = Vec::new();
    for flow in &params.flows {
        for (p, v) in spawn_flow(&mut rng, flow, &mut placed, params.min_separation_cm)? {
            walkers.push(Walker {
                id: next_id,
                position: p,
                velocity: v,
                born: 0,
                leaves: None,
            });
            next_id += 1;
        }
    }

    let mut scripted = params.events.clone();
    scripted.sort_by_key(|e| e.start);
    let mut events = Vec::with_capacity(scripted.len());
    for se in &scripted {
        let kind = match (se.obstacles.is_empty(), se.flows.is_empty()) {
            (false, true) => EventKind::Obstacle,
            (true, false) => EventKind::Population,
            (false, false) => EventKind::Both,
            (true, true) => {
                return Err(EvalError::InvalidParams(format!(
                    "event at frame {} has neither obstacles nor flows",
                    se.start
                )))
            }
        };
        let mut agents = Vec::new();
        let mut event_placed = Vec::new();
        for flow in &se.flows {
            for (p, v) in spawn_flow(&mut rng, flow, &mut event_placed, params.min_separation_cm)? {
                agents.push(EventAgent::new(p, v).with_id(next_id));
                walkers.push(Walker {
                    id: next_id,
                    position: p,
                    velocity: v,
                    born: se.start,
                    leaves: se.duration.map(|d| se.start + d),
                });
                next_id += 1;
            }
        }
        let spec = EventSpec {
            start: se.start,
            duration: se.duration,
            kind,
            obstacles: se.obstacles.clone(),
            agents,
        };
        crate::forecast::validate_window(t, t_e, std::slice::from_ref(&spec))
            .map_err(|e| EvalError::InvalidParams(e.to_string()))?;
        events.push(spec);
    }

    // per-frame speed factor for steps f -> f+1 at or after the cut
    let mut factors = Vec::with_capacity((t_e - t) as usize);
    for f in t..t_e {
        let mut w = world.clone();
        for e in events.iter().filter(|e| e.kind.has_obstacles()) {
            if e.start <= f && e.end().is_none_or(|stop| stop > f) {
                for poly in &e.obstacles {
                    w = w.add_obstacle(poly)?;
                }
            }
        }
        let ec = environment_complexity(&w);
        factors.push(if ec >= 1.0 { 0.0 } else { 1.0 - ec });
    }

    let mut truth = Vec::with_capacity(walkers.len());
    for w in &walkers {
        let last = w.leaves.map_or(t_e, |l| l.min(t_e));
        let mut samples = Vec::new();
        let mut effective = 0.0;
        for f in w.born..=last {
            if f > w.born {
                let step = f - 1;
                effective += if step < t {
                    1.0
                } else {
                    factors[(step - t) as usize]
                };
            }
            let position = if effective == 0.0 {
                w.position
            } else {
                w.position + w.velocity * effective
            };
            samples.push(Sample { frame: f, position });
        }
        truth.push(AgentTrack::new(w.id, samples)?);
    }

    let observed = truth
        .iter()
        .zip(&walkers)
        .filter(|(_, w)| w.born == 0)
        .filter_map(|(tr, _)| tr.truncated(t))
        .collect();

    Ok(SyntheticScenario {
        label: params.label.clone(),
        world_config,
        world,
        cut_frame: t,
        target_frame: t_e,
        observed,
        truth,
        events,
    })
}
