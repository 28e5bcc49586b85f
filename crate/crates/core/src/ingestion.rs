//! Trajectory files, track validation and motion vectors at the cut frame.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::world::{has_extension, Calibration, Unit, WorldModel};

pub type Frame = i64;
pub type AgentId = u64;

/// Default motion-vector span in frames.
pub const DEFAULT_ALPHA: u32 = 5;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: duplicate sample for agent {agent_id} at frame {frame}")]
    DuplicateSample {
        line: u64,
        agent_id: AgentId,
        frame: Frame,
    },
    #[error(
        "line {line}: frames for agent {agent_id} are not increasing ({frame} after {previous})"
    )]
    NonMonotone {
        line: u64,
        agent_id: AgentId,
        frame: Frame,
        previous: Frame,
    },
    #[error("invalid track for agent {agent_id}: {message}")]
    InvalidTrack { agent_id: AgentId, message: String },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub frame: Frame,
    pub position: Point2,
}

/// One pedestrian's time-indexed positions, frames strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrack {
    agent_id: AgentId,
    samples: Vec<Sample>,
}

impl AgentTrack {
    pub fn new(agent_id: AgentId, samples: Vec<Sample>) -> Result<Self, IngestError> {
        let invalid = |message: String| IngestError::InvalidTrack { agent_id, message };
        if samples.is_empty() {
            return Err(invalid("track has no samples".into()));
        }
        for w in samples.windows(2) {
            if w[1].frame <= w[0].frame {
                return Err(invalid(format!(
                    "frames not strictly increasing ({} then {})",
                    w[0].frame, w[1].frame
                )));
            }
        }
        if let Some(s) = samples.iter().find(|s| !s.position.is_finite()) {
            return Err(invalid(format!("non-finite position at frame {}", s.frame)));
        }
        Ok(Self { agent_id, samples })
    }

    pub fn agent_id(&self) -> AgentId {
        self.agent_id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn first_frame(&self) -> Frame {
        self.samples[0].frame
    }

    pub fn last_frame(&self) -> Frame {
        self.samples[self.samples.len() - 1].frame
    }

    /// Latest sample at or before `frame`.
    pub fn sample_at_or_before(&self, frame: Frame) -> Option<&Sample> {
        let idx = self.samples.partition_point(|s| s.frame <= frame);
        idx.checked_sub(1).map(|i| &self.samples[i])
    }

    /// Position at `frame`, linearly interpolated between enclosing samples.
    /// `None` outside the observed range.
    pub fn position_at(&self, frame: Frame) -> Option<Point2> {
        let idx = self.samples.partition_point(|s| s.frame < frame);
        let next = self.samples.get(idx)?;
        if next.frame == frame {
            return Some(next.position);
        }
        let prev = &self.samples[idx.checked_sub(1)?];
        let t = (frame - prev.frame) as f64 / (next.frame - prev.frame) as f64;
        Some(prev.position + (next.position - prev.position) * t)
    }

    /// Copy restricted to samples at or before `frame`.
    pub fn truncated(&self, frame: Frame) -> Option<AgentTrack> {
        let n = self.samples.partition_point(|s| s.frame <= frame);
        (n > 0).then(|| AgentTrack {
            agent_id: self.agent_id,
            samples: self.samples[..n].to_vec(),
        })
    }
}

/// How the raw displacement over the span is turned into a motion vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionScaling {
    /// Displacement divided by the actual span (cm/frame).
    #[default]
    PerFrame,
    /// The literal `X_t - X_{t-alpha}` displacement.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionVector {
    pub agent_id: AgentId,
    pub vector: Point2,
    /// Frames actually spanned by the two samples used.
    pub span: u32,
    /// Set when the track had a single usable sample.
    pub stationary_by_default: bool,
}

/// Motion vector of `track` at cut frame `t` over `alpha` frames.
///
/// The anchor is the latest sample at or before `t`. The reference is the
/// latest sample at or before `t - alpha`, falling back to the earliest
/// sample when the track is shorter than `alpha`.
pub fn motion_vector(
    track: &AgentTrack,
    t: Frame,
    alpha: u32,
    scaling: MotionScaling,
) -> Result<MotionVector, IngestError> {
    let alpha = alpha.max(1);
    let anchor = track
        .sample_at_or_before(t)
        .ok_or_else(|| IngestError::InvalidTrack {
            agent_id: track.agent_id,
            message: format!("no sample at or before cut frame {t}"),
        })?;
    let reference = track
        .sample_at_or_before(t - alpha as Frame)
        .unwrap_or(&track.samples[0]);

    if reference.frame >= anchor.frame {
        return Ok(MotionVector {
            agent_id: track.agent_id,
            vector: Point2::ZERO,
            span: 0,
            stationary_by_default: true,
        });
    }
    let span = (anchor.frame - reference.frame) as u32;
    let delta = anchor.position - reference.position;
    let vector = match scaling {
        MotionScaling::PerFrame => delta * (1.0 / span as f64),
        MotionScaling::Raw => delta,
    };
    Ok(MotionVector {
        agent_id: track.agent_id,
        vector,
        span,
        stationary_by_default: false,
    })
}

/// Tracks observed up to the cut frame, over a static world.
#[derive(Debug, Clone)]
pub struct Scene {
    tracks: Vec<AgentTrack>,
    cut_frame: Frame,
    world: WorldModel,
}

impl Scene {
    pub fn new(
        mut tracks: Vec<AgentTrack>,
        cut_frame: Frame,
        world: WorldModel,
    ) -> Result<Self, IngestError> {
        tracks.sort_by_key(|t| t.agent_id);
        for w in tracks.windows(2) {
            if w[0].agent_id == w[1].agent_id {
                return Err(IngestError::InvalidScene(format!(
                    "duplicate agent id {}",
                    w[0].agent_id
                )));
            }
        }
        if let Some(t) = tracks.iter().find(|t| t.first_frame() > cut_frame) {
            return Err(IngestError::InvalidScene(format!(
                "agent {} has no sample at or before cut frame {cut_frame}",
                t.agent_id
            )));
        }
        Ok(Self {
            tracks,
            cut_frame,
            world,
        })
    }

    /// Keeps the agents present at the cut frame (observed at or before it
    /// and not gone before it) and drops samples after it.
    pub fn from_observations(
        tracks: &[AgentTrack],
        cut_frame: Frame,
        world: WorldModel,
    ) -> Result<Self, IngestError> {
        let present = tracks
            .iter()
            .filter(|t| t.last_frame() >= cut_frame)
            .filter_map(|t| t.truncated(cut_frame))
            .collect();
        Self::new(present, cut_frame, world)
    }

    pub fn tracks(&self) -> &[AgentTrack] {
        &self.tracks
    }

    pub fn cut_frame(&self) -> Frame {
        self.cut_frame
    }

    pub fn world(&self) -> &WorldModel {
        &self.world
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct JsonTrack {
    agent_id: AgentId,
    samples: Vec<JsonSample>,
}

#[derive(Debug, Deserialize, Serialize)]
struct JsonSample {
    frame: Frame,
    x: f64,
    y: f64,
}

/// Reads a CSV (`frame,agent_id,x,y`) or JSON trajectory file. Coordinates
/// are converted to centimeters; tracks come back sorted by agent id.
pub fn load_trajectories(
    path: &Path,
    unit: Unit,
    calibration: &Calibration,
) -> Result<Vec<AgentTrack>, IngestError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: display.clone(),
        source,
    })?;
    let k = calibration.to_cm_factor(unit);
    let rows = if has_extension(path, "json") {
        parse_json_rows(&text, &display)?
    } else {
        parse_csv_rows(&text)?
    };

    let mut seen = HashSet::new();
    let mut by_agent: BTreeMap<AgentId, Vec<Sample>> = BTreeMap::new();
    for (line, frame, agent_id, x, y) in rows {
        if !seen.insert((agent_id, frame)) {
            return Err(IngestError::DuplicateSample {
                line,
                agent_id,
                frame,
            });
        }
        let samples = by_agent.entry(agent_id).or_default();
        if let Some(prev) = samples.last() {
            if frame < prev.frame {
                return Err(IngestError::NonMonotone {
                    line,
                    agent_id,
                    frame,
                    previous: prev.frame,
                });
            }
        }
        samples.push(Sample {
            frame,
            position: Point2::new(x * k, y * k),
        });
    }
    by_agent
        .into_iter()
        .map(|(id, samples)| AgentTrack::new(id, samples))
        .collect()
}

type Row = (u64, Frame, AgentId, f64, f64);

fn parse_csv_rows(text: &str) -> Result<Vec<Row>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| IngestError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::Malformed {
                line: 1,
                message: format!("missing column '{name}' (expected frame,agent_id,x,y)"),
            })
    };
    let (cf, ci, cx, cy) = (col("frame")?, col("agent_id")?, col("x")?, col("y")?);

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| {
            record.get(i).ok_or_else(|| IngestError::Malformed {
                line,
                message: format!("missing field '{name}'"),
            })
        };
        let parse_err = |name: &str, raw: &str| IngestError::Malformed {
            line,
            message: format!("invalid {name} '{raw}'"),
        };
        let frame_raw = field(cf, "frame")?;
        let id_raw = field(ci, "agent_id")?;
        let x_raw = field(cx, "x")?;
        let y_raw = field(cy, "y")?;
        let frame: Frame = frame_raw
            .parse()
            .map_err(|_| parse_err("frame", frame_raw))?;
        let id: AgentId = id_raw.parse().map_err(|_| parse_err("agent_id", id_raw))?;
        let x: f64 = x_raw.parse().map_err(|_| parse_err("x", x_raw))?;
        let y: f64 = y_raw.parse().map_err(|_| parse_err("y", y_raw))?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(IngestError::Malformed {
                line,
                message: "non-finite coordinate".into(),
            });
        }
        rows.push((line, frame, id, x, y));
    }
    Ok(rows)
}

fn parse_json_rows(text: &str, path: &str) -> Result<Vec<Row>, IngestError> {
    let tracks: Vec<JsonTrack> = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    // JSON has no meaningful line numbers per sample; report the ordinal
    let mut rows = Vec::new();
    let mut n = 0;
    for t in tracks {
        for s in t.samples {
            n += 1;
            rows.push((n, s.frame, t.agent_id, s.x, s.y));
        }
    }
    Ok(rows)
}

/// Writes tracks in centimeters, CSV or JSON by extension.
pub fn save_trajectories(path: &Path, tracks: &[AgentTrack]) -> Result<(), IngestError> {
    let io = |source: std::io::Error| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut sorted: Vec<&AgentTrack> = tracks.iter().collect();
    sorted.sort_by_key(|t| t.agent_id);

    if has_extension(path, "json") {
        let json: Vec<JsonTrack> = sorted
            .iter()
            .map(|t| JsonTrack {
                agent_id: t.agent_id,
                samples: t
                    .samples
                    .iter()
                    .map(|s| JsonSample {
                        frame: s.frame,
                        x: s.position.x,
                        y: s.position.y,
                    })
                    .collect(),
            })
            .collect();
        let text = serde_json::to_string_pretty(&json).map_err(|e| io(e.into()))?;
        return std::fs::write(path, text).map_err(io);
    }

    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    w.write_record(["frame", "agent_id", "x", "y"])
        .map_err(|e| io(e.into()))?;
    for t in sorted {
        for s in &t.samples {
            w.write_record([
                s.frame.to_string(),
                t.agent_id.to_string(),
                s.position.x.to_string(),
                s.position.y.to_string(),
            ])
            .map_err(|e| io(e.into()))?;
        }
    }
    w.flush().map_err(io)
}
