//! Event-segmented fast-forward of every agent from the cut frame to the
//! target frame.
//!
//! Within a segment each agent advances along its motion vector, scaled by
//! `max(0, 1 - EC - IP_i)` where EC is the obstacle coverage of the segment's
//! world and IP_i a Weibull-sampled reduction for the agent's local density.
//! Positions are kept as `origin + motion * s`, with `s` the accumulated
//! effective frames, so piecewise advancement composes exactly.

mod events;
mod reposition;
mod timeline;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use events::{load_events, save_events, EventAgent, EventKind, EventSpec};
pub use reposition::{
    reposition_points, RepositionOutcome, DEFAULT_MAX_ITERATIONS, SEPARATION_TOLERANCE,
};
pub use timeline::{segment_timeline, validate_window, Segment};

use crate::geometry::Point2;
use crate::ingestion::{motion_vector, AgentId, Frame, IngestError, MotionScaling, Scene};
use crate::rng::substream;
use crate::statistics::{
    density_level, local_densities, sample_reduction, StatsError, WeibullTable,
    DEFAULT_DENSITY_RADIUS_CM,
};
use crate::world::{environment_complexity, has_extension, WorldError, WorldModel};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("event {index}: {message}")]
    InvalidEvent { index: usize, message: String },
    #[error("environment saturated")]
    EnvironmentSaturated,
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("failed to read {path}: {message}")]
    Io { path: String, message: String },
    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
}

/// Which position the EC-penalized displacement is added to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EcBase {
    /// The segment start position; EC scales the whole displacement.
    #[default]
    SegmentStart,
    /// The pure dead-reckoning prediction, read literally. The penalized
    /// displacement is added on top of the unpenalized one.
    PdrPrediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub alpha: u32,
    pub motion_scaling: MotionScaling,
    pub density_radius_cm: f64,
    pub ec_base: EcBase,
    /// Defaults to the calibrated person size.
    pub min_separation_cm: Option<f64>,
    pub max_reposition_iterations: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            alpha: crate::ingestion::DEFAULT_ALPHA,
            motion_scaling: MotionScaling::PerFrame,
            density_radius_cm: DEFAULT_DENSITY_RADIUS_CM,
            ec_base: EcBase::SegmentStart,
            min_separation_cm: None,
            max_reposition_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForecastRequest {
    pub scene: Scene,
    pub target_frame: Frame,
    pub events: Vec<EventSpec>,
    pub seed: u64,
    pub config: ForecastConfig,
    pub table: WeibullTable,
    pub trace: bool,
}

impl ForecastRequest {
    pub fn new(scene: Scene, target_frame: Frame, seed: u64) -> Self {
        Self {
            scene,
            target_frame,
            events: Vec::new(),
            seed,
            config: ForecastConfig::default(),
            table: WeibullTable::default(),
            trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        validate_window(self.scene.cut_frame(), self.target_frame, &self.events)?;
        let c = &self.config;
        if c.alpha == 0 {
            return Err(ForecastError::InvalidRequest("alpha must be >= 1".into()));
        }
        if !(c.density_radius_cm.is_finite() && c.density_radius_cm > 0.0) {
            return Err(ForecastError::InvalidRequest(
                "density radius must be positive".into(),
            ));
        }
        let sep = self.min_separation_cm();
        if !(sep.is_finite() && sep > 0.0) {
            return Err(ForecastError::InvalidRequest(
                "minimum separation must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn min_separation_cm(&self) -> f64 {
        self.config
            .min_separation_cm
            .unwrap_or(self.scene.world().calibration().avg_person_size_cm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    /// Entered with the event at this index.
    Event(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Resolved,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentForecast {
    pub agent_id: AgentId,
    pub provenance: Provenance,
    /// Position at the cut frame (or at insertion for event agents).
    pub origin: Point2,
    /// Motion vector, cm/frame.
    pub motion: Point2,
    /// Dead reckoning only.
    pub pdr: Point2,
    /// Dead reckoning penalized by environment complexity.
    pub ec: Point2,
    /// Dead reckoning penalized by environment complexity and interaction.
    pub ip: Point2,
    /// Position after repositioning.
    pub final_position: Point2,
    pub status: Resolution,
    /// Stood inside an obstacle that appeared during the forecast.
    pub inside_new_obstacle: bool,
    /// Frame at which the agent's event expired, if it did.
    pub retired_at: Option<Frame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub agent_id: AgentId,
    pub density: f64,
    pub level: u8,
    pub reduction: f64,
    pub factor: f64,
    pub start: Point2,
    pub end: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrace {
    pub index: usize,
    pub start: Frame,
    pub end: Frame,
    pub active_events: Vec<usize>,
    pub environment_complexity: f64,
    pub steps: Vec<AgentStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastOutput {
    pub cut_frame: Frame,
    pub target_frame: Frame,
    pub seed: u64,
    pub agents: Vec<AgentForecast>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<SegmentTrace>>,
}

/// Dead reckoning: `position + motion * frames`.
pub fn pdr_step(position: Point2, motion: Point2, frames: Frame) -> Point2 {
    position + motion * frames as f64
}

/// `max(0, 1 - EC - IP)`, or zero when EC saturates.
pub fn penalty_factor(ec: f64, ip: f64) -> f64 {
    if ec >= 1.0 {
        return 0.0;
    }
    (1.0 - ec - ip).max(0.0)
}

/// Dead reckoning penalized by environment complexity and interaction.
pub fn penalized_step(position: Point2, motion: Point2, frames: Frame, ec: f64, ip: f64) -> Point2 {
    position + motion * (frames as f64 * penalty_factor(ec, ip))
}

/// Effective-frame multipliers for the EC stage and the EC+IP stage.
fn stage_factors(base: EcBase, ec: f64, ip: f64) -> (f64, f64) {
    if ec >= 1.0 {
        return (0.0, 0.0);
    }
    match base {
        EcBase::SegmentStart => (1.0 - ec, penalty_factor(ec, ip)),
        EcBase::PdrPrediction => (2.0 - ec, (2.0 - ec - ip).max(0.0)),
    }
}

#[derive(Debug, Clone)]
struct AgentState {
    id: AgentId,
    provenance: Provenance,
    origin: Point2,
    motion: Point2,
    s_pdr: f64,
    s_ec: f64,
    s_ip: f64,
    retired_at: Option<Frame>,
    inside_new_obstacle: bool,
}

impl AgentState {
    fn at(&self, s: f64) -> Point2 {
        if s == 0.0 {
            self.origin
        } else {
            self.origin + self.motion * s
        }
    }

    fn position(&self) -> Point2 {
        self.at(self.s_ip)
    }

    fn active(&self) -> bool {
        self.retired_at.is_none()
    }
}

/// Result of advancing all segments, before repositioning.
#[derive(Debug, Clone)]
pub struct Advanced {
    agents: Vec<AgentState>,
    final_world: WorldModel,
    trace: Option<Vec<SegmentTrace>>,
}

impl Advanced {
    /// Forecasts with `final_position` equal to the pre-repositioning
    /// position and status `Resolved`.
    pub fn forecasts(&self) -> Vec<AgentForecast> {
        self.agents
            .iter()
            .map(|a| AgentForecast {
                agent_id: a.id,
                provenance: a.provenance,
                origin: a.origin,
                motion: a.motion,
                pdr: a.at(a.s_pdr),
                ec: a.at(a.s_ec),
                ip: a.at(a.s_ip),
                final_position: a.position(),
                status: Resolution::Resolved,
                inside_new_obstacle: a.inside_new_obstacle,
                retired_at: a.retired_at,
            })
            .collect()
    }

    pub fn final_world(&self) -> &WorldModel {
        &self.final_world
    }
}

fn initial_states(request: &ForecastRequest) -> Result<Vec<AgentState>, ForecastError> {
    let t = request.scene.cut_frame();
    request
        .scene
        .tracks()
        .iter()
        .map(|track| {
            let m = motion_vector(
                track,
                t,
                request.config.alpha,
                request.config.motion_scaling,
            )?;
            let anchor = track
                .sample_at_or_before(t)
                .expect("scene tracks have a sample at or before the cut");
            // tracker gap at the cut: dead-reckon the last observation forward
            let origin = if anchor.frame == t {
                anchor.position
            } else {
                pdr_step(anchor.position, m.vector, t - anchor.frame)
            };
            Ok(AgentState {
                id: track.agent_id(),
                provenance: Provenance::Original,
                origin,
                motion: m.vector,
                s_pdr: 0.0,
                s_ec: 0.0,
                s_ip: 0.0,
                retired_at: None,
                inside_new_obstacle: false,
            })
        })
        .collect()
}

/// Ids for event agents: explicit ids are kept, the rest are numbered after
/// the largest id in use, in event order.
fn event_agent_ids(request: &ForecastRequest) -> Result<Vec<Vec<AgentId>>, ForecastError> {
    let mut used: std::collections::BTreeSet<AgentId> = request
        .scene
        .tracks()
        .iter()
        .map(|t| t.agent_id())
        .collect();
    for e in &request.events {
        for g in &e.agents {
            if let Some(id) = g.id {
                if !used.insert(id) {
                    return Err(ForecastError::InvalidRequest(format!(
                        "event agent id {id} is already in use"
                    )));
                }
            }
        }
    }
    let mut next = used.last().map_or(0, |&m| m + 1);
    Ok(request
        .events
        .iter()
        .map(|e| {
            e.agents
                .iter()
                .map(|g| {
                    g.id.unwrap_or_else(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect()
        })
        .collect())
}

fn world_with_events(
    base: &WorldModel,
    events: &[EventSpec],
    active: &[usize],
) -> Result<WorldModel, ForecastError> {
    let mut world = base.clone();
    for &k in active {
        if events[k].kind.has_obstacles() {
            for polygon in &events[k].obstacles {
                world = world.add_obstacle(polygon)?;
            }
        }
    }
    Ok(world)
}

/// Applies segment `active` events: retires agents of expired events and
/// inserts agents of newly active population events.
fn apply_population(
    agents: &mut Vec<AgentState>,
    events: &[EventSpec],
    ids: &[Vec<AgentId>],
    inserted: &mut [bool],
    active: &[usize],
    frame: Frame,
) {
    for a in agents.iter_mut() {
        if let Provenance::Event(k) = a.provenance {
            if a.active() && !active.contains(&k) {
                a.retired_at = Some(frame);
            }
        }
    }
    for &k in active {
        if inserted[k] || !events[k].kind.has_agents() {
            continue;
        }
        inserted[k] = true;
        for (g, &id) in events[k].agents.iter().zip(&ids[k]) {
            agents.push(AgentState {
                id,
                provenance: Provenance::Event(k),
                origin: g.position(),
                motion: g.motion(),
                s_pdr: 0.0,
                s_ec: 0.0,
                s_ip: 0.0,
                retired_at: None,
                inside_new_obstacle: false,
            });
        }
    }
}

/// Advances every active agent over one segment. Each agent draws IP from
/// its own `(seed, agent, segment)` stream.
fn advance_segment(
    agents: &mut [AgentState],
    world: &WorldModel,
    request: &ForecastRequest,
    index: usize,
    segment: &Segment,
) -> Result<SegmentTrace, ForecastError> {
    let ec = environment_complexity(world);
    let frames = segment.frames() as f64;
    let live: Vec<usize> = (0..agents.len()).filter(|&i| agents[i].active()).collect();
    let starts: Vec<Point2> = live.iter().map(|&i| agents[i].position()).collect();
    let densities = local_densities(&starts, request.config.density_radius_cm)?;

    let draws: Vec<(u8, f64)> = live
        .par_iter()
        .zip(densities.par_iter())
        .map(|(&i, &rho)| {
            let level = density_level(rho);
            let mut rng = substream(request.seed, agents[i].id, index as u64);
            sample_reduction(&request.table, level, &mut rng).map(|ip| (level, ip))
        })
        .collect::<Result<_, _>>()?;

    let mut steps = Vec::with_capacity(live.len());
    for (n, &i) in live.iter().enumerate() {
        let (level, ip) = draws[n];
        let (f_ec, f_ip) = stage_factors(request.config.ec_base, ec, ip);
        let a = &mut agents[i];
        a.s_pdr += frames;
        a.s_ec += frames * f_ec;
        a.s_ip += frames * f_ip;
        steps.push(AgentStep {
            agent_id: a.id,
            density: densities[n],
            level,
            reduction: ip,
            factor: f_ip,
            start: starts[n],
            end: a.position(),
        });
    }
    Ok(SegmentTrace {
        index,
        start: segment.start,
        end: segment.end,
        active_events: segment.active.clone(),
        environment_complexity: ec,
        steps,
    })
}

fn flag_new_obstacles(agents: &mut [AgentState], previous: &WorldModel, current: &WorldModel) {
    for a in agents.iter_mut().filter(|a| a.active()) {
        let p = a.position();
        if previous.is_free(p) && !current.is_free(p) {
            a.inside_new_obstacle = true;
        }
    }
}

/// Runs every segment without the final repositioning pass.
pub fn advance(request: &ForecastRequest) -> Result<Advanced, ForecastError> {
    request.validate()?;
    let t = request.scene.cut_frame();
    let t_e = request.target_frame;
    let segments = segment_timeline(t, t_e, &request.events)?;
    let ids = event_agent_ids(request)?;
    let base = request.scene.world();

    let mut agents = initial_states(request)?;
    let mut inserted = vec![false; request.events.len()];
    let mut previous_world = base.clone();
    let mut trace = Vec::new();

    for (index, segment) in segments.iter().enumerate() {
        let world = world_with_events(base, &request.events, &segment.active)?;
        flag_new_obstacles(&mut agents, &previous_world, &world);
        apply_population(
            &mut agents,
            &request.events,
            &ids,
            &mut inserted,
            &segment.active,
            segment.start,
        );
        trace.push(advance_segment(
            &mut agents,
            &world,
            request,
            index,
            segment,
        )?);
        previous_world = world;
    }

    // state at the target frame itself, including events starting there
    let final_active: Vec<usize> = request
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| timeline::is_active(e, t_e, t_e))
        .map(|(k, _)| k)
        .collect();
    let final_world = world_with_events(base, &request.events, &final_active)?;
    flag_new_obstacles(&mut agents, &previous_world, &final_world);
    apply_population(
        &mut agents,
        &request.events,
        &ids,
        &mut inserted,
        &final_active,
        t_e,
    );

    agents.sort_by_key(|a| a.id);
    Ok(Advanced {
        agents,
        final_world,
        trace: request.trace.then_some(trace),
    })
}

/// Repositions the active agents of `forecasts` in place against `world`.
pub fn reposition(
    forecasts: &mut [AgentForecast],
    world: &WorldModel,
    min_separation_cm: f64,
    max_iterations: usize,
) -> Result<RepositionOutcome, ForecastError> {
    let live: Vec<usize> = (0..forecasts.len())
        .filter(|&i| forecasts[i].retired_at.is_none())
        .collect();
    let ids: Vec<AgentId> = live.iter().map(|&i| forecasts[i].agent_id).collect();
    let positions: Vec<Point2> = live.iter().map(|&i| forecasts[i].final_position).collect();
    let outcome = reposition_points(&ids, &positions, world, min_separation_cm, max_iterations)?;
    for (n, &i) in live.iter().enumerate() {
        forecasts[i].final_position = outcome.positions[n];
        forecasts[i].status = if outcome.unresolved[n] {
            Resolution::Unresolved
        } else {
            Resolution::Resolved
        };
    }
    Ok(outcome)
}

fn finish(request: &ForecastRequest, advanced: Advanced) -> Result<ForecastOutput, ForecastError> {
    let mut agents = advanced.forecasts();
    reposition(
        &mut agents,
        &advanced.final_world,
        request.min_separation_cm(),
        request.config.max_reposition_iterations,
    )?;
    Ok(ForecastOutput {
        cut_frame: request.scene.cut_frame(),
        target_frame: request.target_frame,
        seed: request.seed,
        agents,
        trace: advanced.trace,
    })
}

/// Full pipeline: segmented advancement followed by repositioning.
/// Deterministic for a fixed request and seed.
pub fn run_forecast(request: &ForecastRequest) -> Result<ForecastOutput, ForecastError> {
    let advanced = advance(request)?;
    finish(request, advanced)
}

/// Event-free forecast advanced as one span `[t, t_e]`, bypassing the
/// timeline.
pub fn run_single_segment(request: &ForecastRequest) -> Result<ForecastOutput, ForecastError> {
    request.validate()?;
    if !request.events.is_empty() {
        return Err(ForecastError::InvalidRequest(
            "single-segment forecast takes no events".into(),
        ));
    }
    let segment = Segment {
        start: request.scene.cut_frame(),
        end: request.target_frame,
        active: Vec::new(),
    };
    let world = request.scene.world().clone();
    let mut agents = initial_states(request)?;
    let trace = advance_segment(&mut agents, &world, request, 0, &segment)?;
    agents.sort_by_key(|a| a.id);
    let advanced = Advanced {
        agents,
        final_world: world,
        trace: request.trace.then(|| vec![trace]),
    };
    finish(request, advanced)
}

impl ForecastOutput {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forecast output serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = [
            "agent_id",
            "provenance",
            "status",
            "pdr_x",
            "pdr_y",
            "ec_x",
            "ec_y",
            "ip_x",
            "ip_y",
            "final_x",
            "final_y",
        ];
        w.write_record(header).expect("in-memory write");
        for a in &self.agents {
            let provenance = match a.provenance {
                Provenance::Original => "original".to_string(),
                Provenance::Event(k) => format!("event:{k}"),
            };
            let status = match a.status {
                Resolution::Resolved => "resolved",
                Resolution::Unresolved => "unresolved",
            };
            let mut row = vec![a.agent_id.to_string(), provenance, status.to_string()];
            for p in [a.pdr, a.ec, a.ip, a.final_position] {
                row.push(p.x.to_string());
                row.push(p.y.to_string());
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    /// Writes JSON, or CSV when the extension is `.csv`.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = if has_extension(path, "csv") {
            self.to_csv()
        } else {
            self.to_json()
        };
        std::fs::write(path, text)
    }

    pub fn load(path: &Path) -> Result<Self, ForecastError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ForecastError::Io {
            path: display.clone(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| ForecastError::Parse {
            path: display,
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::{AgentTrack, Sample};
    use crate::world::{Calibration, Grid};

    fn world(cols: usize, rows: usize, cell: f64) -> WorldModel {
        WorldModel::new(
            Grid::new(cols, rows, cell).unwrap(),
            Calibration::from_pixel_size(45.0).unwrap(),
        )
        .unwrap()
    }

    fn walker(id: AgentId, start: Point2, motion: Point2, t: Frame) -> AgentTrack {
        let samples = (0..=t)
            .map(|f| Sample {
                frame: f,
                position: start + motion * (f - t) as f64,
            })
            .collect();
        AgentTrack::new(id, samples).unwrap()
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2> {
        vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ]
    }

    fn single_agent_request(w: WorldModel, events: Vec<EventSpec>) -> ForecastRequest {
        let track = walker(1, Point2::new(2.0, 2.0), Point2::new(1.0, 0.0), 60);
        let scene = Scene::new(vec![track], 60, w).unwrap();
        let mut req = ForecastRequest::new(scene, 130, 1);
        req.table = WeibullTable::default().with_reduction_cap(0.0).unwrap();
        req.events = events;
        req
    }

    #[test]
    fn pdr_examples() {
        assert_eq!(
            pdr_step(Point2::ZERO, Point2::new(1.0, 0.0), 70),
            Point2::new(70.0, 0.0)
        );
        let x = Point2::new(3.0, 4.0);
        assert_eq!(pdr_step(x, Point2::ZERO, 55), x);
        assert_eq!(
            pdr_step(Point2::new(10.0, -5.0), Point2::new(-2.0, 3.0), 10),
            Point2::new(-10.0, 25.0)
        );
    }

    #[test]
    fn penalized_examples() {
        let m = Point2::new(1.0, 0.0);
        assert_eq!(
            penalized_step(Point2::ZERO, m, 70, 0.25, 0.0),
            Point2::new(52.5, 0.0)
        );
        let x = Point2::new(7.0, 7.0);
        assert_eq!(penalized_step(x, m, 70, 1.0, 0.0), x);
        assert_eq!(penalized_step(x, m, 70, 1.0, 0.3), x);
        assert_eq!(penalized_step(x, m, 70, 0.6, 0.7), x);
    }

    #[test]
    fn ideal_run_is_dead_reckoning() {
        let out = run_forecast(&single_agent_request(world(40, 20, 10.0), vec![])).unwrap();
        let a = &out.agents[0];
        assert_eq!(a.ip, Point2::new(72.0, 2.0));
        assert_eq!(a.final_position, a.ip);
        assert_eq!(a.pdr, a.ip);
    }

    #[test]
    fn obstacle_event_slows_second_segment() {
        // 200 of the 800 cells
        let ev = EventSpec::obstacle(70, None, vec![rect(200.0, 100.0, 400.0, 200.0)]);
        let out = run_forecast(&single_agent_request(world(40, 20, 10.0), vec![ev])).unwrap();
        let a = &out.agents[0];
        // 10 frames at full speed, 60 at 0.75
        assert_eq!(a.ip, Point2::new(2.0 + 55.0, 2.0));
        assert_eq!(a.pdr, Point2::new(72.0, 2.0));
    }

    #[test]
    fn saturated_world_freezes_before_repositioning() {
        let w = WorldModel::new(
            Grid::with_mask(4, 4, 10.0, vec![true; 16]).unwrap(),
            Calibration::from_pixel_size(45.0).unwrap(),
        )
        .unwrap();
        let req = single_agent_request(w, vec![]);
        let adv = advance(&req).unwrap();
        let f = &adv.forecasts()[0];
        assert_eq!(f.ip, f.origin);
        assert_eq!(f.ec, f.origin);
        assert!(matches!(
            run_forecast(&req),
            Err(ForecastError::EnvironmentSaturated)
        ));
    }

    #[test]
    fn population_event_inserts_and_retires() {
        let g = EventAgent::new(Point2::new(100.0, 100.0), Point2::new(0.0, 1.0));
        let ev = EventSpec::population(70, Some(20), vec![g]);
        let out = run_forecast(&single_agent_request(world(40, 20, 10.0), vec![ev])).unwrap();
        assert_eq!(out.agents.len(), 2);
        let e = &out.agents[1];
        assert_eq!(e.agent_id, 2);
        assert_eq!(e.provenance, Provenance::Event(0));
        assert_eq!(e.retired_at, Some(90));
        assert_eq!(e.ip, Point2::new(100.0, 120.0));
        // the original agent's dead-reckoning term is untouched
        assert_eq!(out.agents[0].pdr, Point2::new(72.0, 2.0));
    }

    #[test]
    fn expired_obstacle_restores_speed() {
        let ev = EventSpec::obstacle(70, Some(20), vec![rect(200.0, 100.0, 400.0, 200.0)]);
        let out = run_forecast(&single_agent_request(world(40, 20, 10.0), vec![ev])).unwrap();
        // 10 + 20*0.75 + 40
        assert_eq!(out.agents[0].ip, Point2::new(2.0 + 65.0, 2.0));
    }

    #[test]
    fn literal_ec_base_adds_to_prediction() {
        let mut req = single_agent_request(world(40, 20, 10.0), vec![]);
        req.config.ec_base = EcBase::PdrPrediction;
        let adv = advance(&req).unwrap();
        assert_eq!(adv.forecasts()[0].ec, Point2::new(2.0 + 140.0, 2.0));
    }

    #[test]
    fn agent_caught_by_new_obstacle_is_flagged_and_moved() {
        let ev = EventSpec::obstacle(70, None, vec![rect(0.0, 0.0, 400.0, 200.0)]);
        let mut w = world(80, 20, 10.0);
        w = w.add_obstacle(&rect(400.0, 0.0, 410.0, 10.0)).unwrap();
        let out = run_forecast(&single_agent_request(w, vec![ev])).unwrap();
        let a = &out.agents[0];
        assert!(a.inside_new_obstacle);
        assert!(out.agents.iter().all(|a| a.status == Resolution::Resolved));
        assert_eq!(a.final_position, Point2::new(405.0, 15.0));
    }

    #[test]
    fn colliding_event_ids_rejected() {
        let g = EventAgent::new(Point2::new(100.0, 100.0), Point2::ZERO).with_id(1);
        let ev = EventSpec::population(70, None, vec![g]);
        let req = single_agent_request(world(40, 20, 10.0), vec![ev]);
        assert!(matches!(
            run_forecast(&req),
            Err(ForecastError::InvalidRequest(_))
        ));
    }

    #[test]
    fn single_segment_matches_timeline() {
        let mut req = single_agent_request(world(40, 20, 10.0), vec![]);
        req.table = WeibullTable::default();
        assert_eq!(
            run_forecast(&req).unwrap(),
            run_single_segment(&req).unwrap()
        );
    }

    #[test]
    fn csv_output_has_header_and_rows() {
        let out = run_forecast(&single_agent_request(world(40, 20, 10.0), vec![])).unwrap();
        let csv = out.to_csv();
        assert!(csv.starts_with("agent_id,provenance,status"));
        assert_eq!(csv.lines().count(), 2);
    }
}
